use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::tensor::{dot, norm, Tensor};
use crate::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Below this power-iteration estimate the weight is treated as zero and
/// left unnormalized.
pub const SPECTRAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Sigmoid,
    Softmax,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::LeakyRelu => 2,
            Activation::Sigmoid => 3,
            Activation::Softmax => 4,
            Activation::Tanh => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu,
            3 => Activation::Sigmoid,
            4 => Activation::Softmax,
            5 => Activation::Tanh,
            _ => return None,
        })
    }

    /// Apply in place to one row of pre-activations.
    pub fn apply_row(self, z: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::LeakyRelu => z.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= LEAKY_SLOPE
                }
            }),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = super::sigmoid(*v)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in z.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                z.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }

    /// Map the gradient w.r.t. one output row to the gradient w.r.t. the
    /// pre-activation row, using only the outputs.
    fn backward_row(self, out: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => grad.iter_mut().zip(out).for_each(|(g, &a)| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::LeakyRelu => grad.iter_mut().zip(out).for_each(|(g, &a)| {
                if a < 0.0 {
                    *g *= LEAKY_SLOPE
                }
            }),
            Activation::Sigmoid => grad
                .iter_mut()
                .zip(out)
                .for_each(|(g, &a)| *g *= a * (1.0 - a)),
            Activation::Tanh => grad
                .iter_mut()
                .zip(out)
                .for_each(|(g, &a)| *g *= 1.0 - a * a),
            Activation::Softmax => {
                let s = dot(grad, out);
                grad.iter_mut()
                    .zip(out)
                    .for_each(|(g, &a)| *g = a * (*g - s));
            }
        }
    }

    fn init_gain(self) -> f64 {
        match self {
            Activation::Relu => 2.0,
            Activation::LeakyRelu => 2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE),
            _ => 1.0,
        }
    }
}

/// Persistent left singular-vector estimate for spectral normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub spectral: Option<SpectralState>,
}

/// What forward needs to remember about the normalization for backward.
#[derive(Debug, Clone)]
pub(crate) struct SpectralCache {
    pub sigma: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::dim(
                "DenseLayer::new bias",
                weight.rows(),
                bias.len(),
            ));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
            spectral: None,
        })
    }

    /// Gaussian fan-in initialization with zero bias.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        spectral: bool,
        rng: &mut R,
    ) -> Self {
        let std = (activation.init_gain() / input.max(1) as f64).sqrt();
        let data = (0..input * output)
            .map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect::<Vec<f64>>();
        let weight = Tensor::from_vec(output, input, data).expect("sized above");
        let mut layer = DenseLayer {
            weight,
            bias: vec![0.0; output],
            activation,
            spectral: None,
        };
        if spectral {
            layer.enable_spectral(rng);
        }
        layer
    }

    /// All-zero weights and bias; a sigmoid head built this way outputs 0.5.
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Tensor::zeros(output, input),
            bias: vec![0.0; output],
            activation,
            spectral: None,
        }
    }

    /// Attach a random unit `u` vector.
    pub fn enable_spectral<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut u: Vec<f64> = (0..self.out_dim())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        normalize(&mut u);
        self.spectral = Some(SpectralState { u });
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    /// Run `iterations` rounds of power iteration, updating the stored `u`.
    /// No-op for layers without spectral normalization.
    pub fn power_iterate(&mut self, iterations: usize) {
        let Some(state) = self.spectral.as_mut() else {
            return;
        };
        for _ in 0..iterations {
            let mut v = wt_times(&self.weight, &state.u);
            if normalize(&mut v) <= SPECTRAL_EPS {
                return;
            }
            let mut u = w_times(&self.weight, &v);
            if normalize(&mut u) <= SPECTRAL_EPS {
                return;
            }
            state.u = u;
        }
    }

    /// Current estimate `σ̂ = ‖Wᵀu‖` of the largest singular value.
    pub fn spectral_estimate(&self) -> Option<f64> {
        self.spectral
            .as_ref()
            .map(|s| norm(&wt_times(&self.weight, &s.u)))
    }

    pub(crate) fn spectral_cache(&self) -> Option<SpectralCache> {
        let state = self.spectral.as_ref()?;
        let mut v = wt_times(&self.weight, &state.u);
        let sigma = normalize(&mut v);
        if sigma <= SPECTRAL_EPS {
            return None;
        }
        Some(SpectralCache {
            sigma,
            v,
            u: state.u.clone(),
        })
    }

    /// The weight used in forward: `W / σ̂` under spectral normalization,
    /// else `W`.
    pub fn effective_weight(&self) -> Tensor {
        match self.spectral_cache() {
            Some(c) => {
                let mut w = self.weight.clone();
                w.scale(1.0 / c.sigma);
                w
            }
            None => self.weight.clone(),
        }
    }

    /// Run power iteration and return the normalized effective weight.
    pub fn spectral_normalize(&mut self, iterations: usize) -> Result<Tensor> {
        if iterations == 0 {
            return Err(Error::Config(
                "spectral_normalize needs iterations >= 1".into(),
            ));
        }
        if self.spectral.is_none() {
            return Err(Error::State("layer has no spectral state".into()));
        }
        self.power_iterate(iterations);
        Ok(self.effective_weight())
    }

    /// Forward for a batch given an already-normalized weight.
    pub(crate) fn forward_with(&self, input: &Tensor, weight: &Tensor) -> Result<Tensor> {
        let mut z = input.matmul_t(weight)?;
        let cols = z.cols();
        for r in 0..z.rows() {
            let row = &mut z.data_mut()[r * cols..(r + 1) * cols];
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
            self.activation.apply_row(row);
        }
        Ok(z)
    }

    /// Backward through activation and affine map. Returns
    /// `(dW, db, dX)` where `dW` is w.r.t. the raw (pre-normalization)
    /// weight.
    pub(crate) fn backward_with(
        &self,
        input: &Tensor,
        output: &Tensor,
        weight: &Tensor,
        spectral: Option<&SpectralCache>,
        grad_out: &Tensor,
    ) -> Result<(Tensor, Vec<f64>, Tensor)> {
        if grad_out.shape() != output.shape() {
            return Err(Error::State(format!(
                "gradient shape {:?} does not match cached output {:?}",
                grad_out.shape(),
                output.shape()
            )));
        }
        let mut dz = grad_out.clone();
        let cols = dz.cols();
        for r in 0..dz.rows() {
            let g = &mut dz.data_mut()[r * cols..(r + 1) * cols];
            self.activation.backward_row(output.row(r), g);
        }
        let d_eff = dz.t_matmul(input)?;
        let db = dz.col_sums();
        let dx = dz.matmul(weight)?;
        let dw = match spectral {
            Some(c) => {
                // d(W/σ)/dW with dσ/dW = u vᵀ
                let proj = d_eff.frobenius_dot(weight);
                let mut dw = d_eff;
                let in_dim = dw.cols();
                for (i, ui) in c.u.iter().enumerate() {
                    let row = &mut dw.data_mut()[i * in_dim..(i + 1) * in_dim];
                    for (g, vj) in row.iter_mut().zip(&c.v) {
                        *g = (*g - proj * ui * vj) / c.sigma;
                    }
                }
                dw
            }
            None => d_eff,
        };
        Ok((dw, db, dx))
    }
}

fn w_times(w: &Tensor, v: &[f64]) -> Vec<f64> {
    w.iter_rows().map(|r| dot(r, v)).collect()
}

fn wt_times(w: &Tensor, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.cols()];
    for (row, &ui) in w.iter_rows().zip(u) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += ui * x;
        }
    }
    out
}

/// Normalize in place, returning the original norm. Vectors with norm
/// below [`SPECTRAL_EPS`] are left alone.
fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > SPECTRAL_EPS {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer_with(w: Vec<f64>, rows: usize, cols: usize) -> DenseLayer {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = DenseLayer::new(
            Tensor::from_vec(rows, cols, w).unwrap(),
            vec![0.0; rows],
            Activation::Identity,
        )
        .unwrap();
        l.enable_spectral(&mut rng);
        l
    }

    #[test]
    fn diagonal_matrix_normalizes_to_unit_top_singular_value() {
        let mut l = layer_with(vec![3.0, 0.0, 0.0, 1.0], 2, 2);
        let w = l.spectral_normalize(60).unwrap();
        let expect = [1.0, 0.0, 0.0, 1.0 / 3.0];
        for (a, b) in w.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn scalar_matrix() {
        let mut l = layer_with(vec![-5.0], 1, 1);
        let w = l.spectral_normalize(1).unwrap();
        assert!((w.data()[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_matrix_is_unchanged() {
        let (s, c) = (0.6_f64, 0.8_f64);
        let mut l = layer_with(vec![c, -s, s, c], 2, 2);
        let w = l.spectral_normalize(3).unwrap();
        for (a, b) in w.data().iter().zip(l.weight.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_left_unchanged() {
        let mut l = layer_with(vec![0.0; 4], 2, 2);
        let w = l.spectral_normalize(5).unwrap();
        assert!(w.data().iter().all(|&v| v == 0.0));
        assert!(w.is_finite());
    }

    #[test]
    fn normalize_requires_iterations_and_state() {
        let mut l = layer_with(vec![1.0], 1, 1);
        assert!(matches!(l.spectral_normalize(0), Err(Error::Config(_))));
        l.spectral = None;
        assert!(matches!(l.spectral_normalize(1), Err(Error::State(_))));
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let mut z = vec![100.0, -100.0, 99.0];
        Activation::Softmax.apply_row(&mut z);
        let s: f64 = z.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(z.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn tags_round_trip() {
        for t in 0..6u8 {
            assert_eq!(Activation::from_tag(t).unwrap().tag(), t);
        }
        assert!(Activation::from_tag(6).is_none());
    }
}
