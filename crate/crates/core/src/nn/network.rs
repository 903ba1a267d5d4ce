use serde::{Deserialize, Serialize};

use super::adam::{AdamOutcome, AdamState};
use super::layer::{DenseLayer, SpectralCache};
use super::tensor::Tensor;
use crate::{Error, Result};

/// A sequence of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Activations retained by [`Mlp::forward_cached`] for [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Tensor>,
    outputs: Vec<Tensor>,
    weights: Vec<Tensor>,
    spectral: Vec<Option<SpectralCache>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        self.outputs.last().expect("non-empty network")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

/// Parameter gradients for every layer plus the gradient w.r.t. the input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<LayerGrad>,
    pub input: Tensor,
}

impl MlpGrad {
    pub fn zeros_like(net: &Mlp, rows: usize) -> Self {
        MlpGrad {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Tensor::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
            input: Tensor::zeros(rows, net.in_dim()),
        }
    }

    /// Flattened in the same order as [`Mlp::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for g in &self.layers {
            v.extend_from_slice(g.weight.data());
            v.extend_from_slice(&g.bias);
        }
        v
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(self.layers.len() * 2);
        for g in &self.layers {
            v.push(g.weight.data());
            v.push(g.bias.as_slice());
        }
        v
    }

    /// Element-wise `self += other`.
    pub fn accumulate(&mut self, other: &MlpGrad) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight
                .data_mut()
                .iter_mut()
                .zip(b.weight.data())
                .for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weight.is_finite() && g.bias.iter().all(|v| v.is_finite()))
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dim(
                    format!("layer {}", i + 1),
                    pair[0].out_dim(),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// One power-iteration step on every spectrally normalized layer.
    pub fn power_iterate(&mut self, iterations: usize) {
        self.layers
            .iter_mut()
            .for_each(|l| l.power_iterate(iterations));
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.cols() != self.in_dim() {
            return Err(Error::dim("layer 0 input", self.in_dim(), input.cols()));
        }
        Ok(())
    }

    /// Pure forward pass.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let w = layer.effective_weight();
            x = layer.forward_with(&x, &w).map_err(|e| relabel(e, i))?;
        }
        Ok(x)
    }

    /// Forward over row chunks in parallel. Rows are independent, so the
    /// result is bit-identical to [`Mlp::forward`].
    pub fn forward_par(&self, input: &Tensor, chunk: usize) -> Result<Tensor> {
        self.check_input(input)?;
        if input.rows() <= chunk {
            return self.forward(input);
        }
        let starts: Vec<usize> = (0..input.rows()).step_by(chunk).collect();
        let parts = crate::par::map(&starts, |&s| {
            let e = (s + chunk).min(input.rows());
            self.forward(&input.slice_rows(s, e))
        });
        let mut data = Vec::with_capacity(input.rows() * self.out_dim());
        for p in parts {
            data.extend_from_slice(p?.data());
        }
        Tensor::from_vec(input.rows(), self.out_dim(), data)
    }

    /// Forward pass retaining what backward needs.
    pub fn forward_cached(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            spectral: Vec::with_capacity(n),
        };
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let sc = layer.spectral_cache();
            let w = match &sc {
                Some(c) => {
                    let mut w = layer.weight.clone();
                    w.scale(1.0 / c.sigma);
                    w
                }
                None => layer.weight.clone(),
            };
            let y = layer.forward_with(&x, &w).map_err(|e| relabel(e, i))?;
            cache.inputs.push(x);
            cache.outputs.push(y.clone());
            cache.weights.push(w);
            cache.spectral.push(sc);
            x = y;
        }
        Ok((x, cache))
    }

    /// Backpropagate `grad_out` (gradient of a scalar loss w.r.t. the network
    /// output) through the cached activations.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Tensor) -> Result<MlpGrad> {
        if cache.outputs.len() != self.layers.len() {
            return Err(Error::State(format!(
                "cache holds {} layers, network has {}",
                cache.outputs.len(),
                self.layers.len()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if cache.weights[i].shape() != layer.weight.shape() {
                return Err(Error::State(format!("cache for layer {i} has stale shape")));
            }
            let (dw, db, dx) = layer.backward_with(
                &cache.inputs[i],
                &cache.outputs[i],
                &cache.weights[i],
                cache.spectral[i].as_ref(),
                &g,
            )?;
            grads.push(LayerGrad {
                weight: dw,
                bias: db,
            });
            g = dx;
        }
        grads.reverse();
        Ok(MlpGrad {
            layers: grads,
            input: g,
        })
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(l.weight.data());
            v.extend_from_slice(&l.bias);
        }
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::dim(
                "Mlp::set_params_flat",
                self.param_count(),
                flat.len(),
            ));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weight.data().len();
            l.weight.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
            let m = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + m]);
            off += m;
        }
        Ok(())
    }

    /// Parameter slices in `(weight, bias)` order per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            v.push(l.weight.data_mut());
            v.push(l.bias.as_mut_slice());
        }
        v
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data().len(), l.bias.len()])
            .collect()
    }

    /// Apply one Adam update from `grad`.
    pub fn adam_step(&mut self, grad: &MlpGrad, state: &mut AdamState) -> Result<AdamOutcome> {
        let grads = grad.slices();
        let mut params = self.param_slices_mut();
        state.step(&mut params, &grads)
    }
}

fn relabel(e: Error, layer: usize) -> Error {
    match e {
        Error::Dimension { expected, got, .. } => {
            Error::dim(format!("layer {layer}"), expected, got)
        }
        other => other,
    }
}
