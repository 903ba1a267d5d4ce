//! Central finite-difference checks shared by the gradient tests and the
//! acceptance run. Each check returns the worst error it saw.

use gold_core::cgan::{
    generator_input, ArchConfig, CGanModel, LatentBatch, LossTerms, RealBatch, TrainConfig,
};
use gold_core::data::{seeded, standard_normal, Sample};
use gold_core::eval::softmax_cross_entropy;
use gold_core::nn::{Activation, DenseLayer, Mlp, Tensor};

const H: f64 = 1e-5;
pub const TOL: f64 = 1e-3;
pub const SEEDS: u64 = 20;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-6)
}

/// Worst error over entries, with a description of where it occurred.
#[derive(Debug, Clone, Default)]
pub struct Worst {
    pub err: f64,
    pub at: String,
}

impl Worst {
    fn merge(&mut self, other: Worst) {
        if other.err > self.err || other.err.is_nan() {
            *self = other;
        }
    }

    pub fn passes(&self) -> bool {
        self.err < TOL
    }
}

fn check(name: &str, analytic: &[f64], numeric: &[f64]) -> Worst {
    if analytic.len() != numeric.len() {
        return Worst {
            err: f64::INFINITY,
            at: format!(
                "{name}: {} analytic vs {} numeric entries",
                analytic.len(),
                numeric.len()
            ),
        };
    }
    let scale = analytic
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut worst = Worst::default();
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        // entries far below the gradient's scale are compared absolutely
        let err = if a.abs().max(n.abs()) < 1e-4 * scale {
            (a - n).abs() / scale
        } else {
            rel_err(*a, *n)
        };
        worst.merge(Worst {
            err,
            at: format!("{name}[{i}]: analytic {a} numeric {n}"),
        });
    }
    worst
}

fn fd(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + H;
            let up = f(&p);
            p[i] = orig - H;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_tensor(rows: usize, cols: usize, rng: &mut gold_core::data::Rng) -> Tensor {
    Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| standard_normal(rng)).collect(),
    )
    .unwrap()
}

/// Smallest |pre-activation| over piecewise-linear units; central
/// differences are only meaningful when no kink lies within one step.
fn kink_margin(net: &Mlp, x: &Tensor) -> f64 {
    let mut h = x.clone();
    let mut margin = f64::INFINITY;
    for layer in &net.layers {
        let w = layer.effective_weight();
        let mut z = h.matmul_t(&w).unwrap();
        let cols = z.cols();
        for r in 0..z.rows() {
            let row = &mut z.data_mut()[r * cols..(r + 1) * cols];
            for (v, b) in row.iter_mut().zip(&layer.bias) {
                *v += b;
                if matches!(layer.activation, Activation::Relu | Activation::LeakyRelu) {
                    margin = margin.min(v.abs());
                }
            }
            layer.activation.apply_row(row);
        }
        h = z;
    }
    margin
}

const MARGIN: f64 = 1e-3;

/// `sum(out ⊙ R)` for a fixed random `R`.
fn projected(net: &Mlp, x: &Tensor, r: &Tensor) -> f64 {
    let y = net.forward(x).unwrap();
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

pub fn layers(seed: u64) -> Worst {
    let mut worst = Worst::default();
    let acts = [
        Activation::Identity,
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Sigmoid,
        Activation::Softmax,
        Activation::Tanh,
    ];
    for &act in &acts {
        for spectral in [false, true] {
            let mut rng = seeded(seed);
            let mut l1 = DenseLayer::init(3, 4, Activation::Tanh, spectral, &mut rng);
            let mut l2 = DenseLayer::init(4, 3, act, spectral, &mut rng);
            // keep relu kinks away from the probe points
            l1.bias.iter_mut().for_each(|b| *b += 0.05);
            l2.bias.iter_mut().for_each(|b| *b += 0.05);
            let mut net = Mlp::new(vec![l1, l2]).unwrap();
            net.power_iterate(3);
            let mut x = random_tensor(5, 3, &mut rng);
            while kink_margin(&net, &x) < MARGIN {
                x = random_tensor(5, 3, &mut rng);
            }
            let r = random_tensor(5, 3, &mut rng);
            let (_, cache) = net.forward_cached(&x).unwrap();
            let g = net.backward(&cache, &r).unwrap();
            let base = net.params_flat();
            let numeric = fd(&base, |p| {
                let mut n = net.clone();
                n.set_params_flat(p).unwrap();
                projected(&n, &x, &r)
            });
            worst.merge(check(
                &format!("seed {seed} {act:?} sn={spectral} params"),
                &g.flat(),
                &numeric,
            ));
            let numeric_x = fd(x.data(), |p| {
                projected(&net, &Tensor::from_vec(5, 3, p.to_vec()).unwrap(), &r)
            });
            worst.merge(check(
                &format!("seed {seed} {act:?} sn={spectral} input"),
                g.input.data(),
                &numeric_x,
            ));
        }
    }
    worst
}

fn small_model(seed: u64) -> (CGanModel, gold_core::data::Rng) {
    let mut rng = seeded(seed);
    let arch = ArchConfig {
        latent_dim: 3,
        hidden_g: vec![6],
        hidden_d: vec![5, 4],
        spectral_norm: true,
        zero_init_heads: false,
    };
    let mut m = CGanModel::new(arch, 2, 3, &TrainConfig::default(), &mut rng).unwrap();
    m.discriminator.power_iterate(2);
    (m, rng)
}

fn real_batch(rng: &mut gold_core::data::Rng) -> (Vec<Sample>, Vec<Vec<f64>>) {
    let lab = (0..4)
        .map(|i| Sample::new(vec![standard_normal(rng), standard_normal(rng)], i % 3))
        .collect();
    let unl = (0..3)
        .map(|_| vec![standard_normal(rng), standard_normal(rng)])
        .collect();
    (lab, unl)
}

pub fn discriminator_losses(seed: u64) -> Worst {
    let mut worst = Worst::default();
    let (model, mut rng) = small_model(seed);
    let (mut lab, mut unl, mut fake);
    loop {
        (lab, unl) = real_batch(&mut rng);
        fake = random_tensor(5, 2, &mut rng);
        let mut rows: Vec<&[f64]> = lab.iter().map(|s| s.x.as_slice()).collect();
        rows.extend(unl.iter().map(Vec::as_slice));
        let all = Tensor::from_rows(&rows, 2).unwrap().vstack(&fake).unwrap();
        if kink_margin(&model.discriminator.trunk, &all) >= MARGIN {
            break;
        }
    }
    let classes = vec![0, 1, 2, 1, 0];
    let weights: Vec<f64> = (0..5).map(|_| standard_normal(&mut rng)).collect();
    let real = RealBatch {
        labeled: &lab,
        unlabeled: &unl,
    };
    for terms in [
        LossTerms {
            gan: true,
            ac: false,
        },
        LossTerms {
            gan: false,
            ac: true,
        },
        LossTerms::ALL,
    ] {
        for w in [None, Some(weights.as_slice())] {
            let (_, grad) = model
                .discriminator_loss_grad(real, &fake, &classes, 0.3, w, terms)
                .unwrap();
            let base = model.discriminator.params_flat();
            let numeric = fd(&base, |p| {
                let mut m = model.clone();
                m.discriminator.set_params_flat(p).unwrap();
                m.discriminator_loss_grad(real, &fake, &classes, 0.3, w, terms)
                    .unwrap()
                    .0
                    .total
            });
            worst.merge(check(
                &format!("seed {seed} {terms:?} weighted={}", w.is_some()),
                &grad.flat(),
                &numeric,
            ));
        }
    }
    worst
}

pub fn generator_loss(seed: u64) -> Worst {
    let mut worst = Worst::default();
    let (model, mut rng) = small_model(seed);
    let latent = loop {
        let l = LatentBatch::sample(6, 3, 3, &mut rng);
        let input = generator_input(&l.z, &l.classes, 3).unwrap();
        let x = model.generator.forward(&input).unwrap();
        if kink_margin(&model.generator, &input) >= MARGIN
            && kink_margin(&model.discriminator.trunk, &x) >= MARGIN
        {
            break l;
        }
    };
    let weights: Vec<f64> = (0..6).map(|_| standard_normal(&mut rng)).collect();
    for w in [None, Some(weights.as_slice())] {
        let (_, grad, _) = model.generator_loss_grad(&latent, 0.7, w).unwrap();
        let base = model.generator.params_flat();
        let numeric = fd(&base, |p| {
            let mut m = model.clone();
            m.generator.set_params_flat(p).unwrap();
            m.generator_loss_grad(&latent, 0.7, w).unwrap().0.total
        });
        worst.merge(check(
            &format!("seed {seed} weighted={}", w.is_some()),
            &grad.flat(),
            &numeric,
        ));
    }
    worst
}

pub fn softmax_cross_entropy_logits(seed: u64) -> Worst {
    let mut rng = seeded(seed);
    let logits = random_tensor(4, 3, &mut rng);
    let classes = [0, 2, 1, 2];
    let (_, grad) = softmax_cross_entropy(&logits, &classes);
    let numeric = fd(logits.data(), |p| {
        softmax_cross_entropy(&Tensor::from_vec(4, 3, p.to_vec()).unwrap(), &classes).0
    });
    check(&format!("seed {seed}"), grad.data(), &numeric)
}

/// Every check over every seed.
pub fn all() -> Worst {
    let mut worst = Worst::default();
    for seed in 0..SEEDS {
        for w in [
            layers(seed),
            discriminator_losses(seed),
            generator_loss(seed),
            softmax_cross_entropy_logits(seed),
        ] {
            worst.merge(w);
        }
    }
    worst
}
