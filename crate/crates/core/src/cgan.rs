//! Auxiliary-classifier conditional GAN.
//!
//! The generator maps `z ⊕ onehot(c)` to a sample. The discriminator is a
//! shared trunk with two heads: a sigmoid real/generated head `D_G` and a
//! softmax class head `D_C`. The discriminator minimizes
//! `E_real[−log D_G] + E_fake[−log(1−D_G)] + L_AC`, the generator minimizes
//! the non-saturating `E_fake[−log D_G] + λ_c E_fake[−log D_C(c|G)]`, where
//! `L_AC = E_labeled[−log D_C(c|x)] + λ_c E_fake[−log D_C(c|G)]`.
//! Unlabeled real samples enter only the real/generated terms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{standard_normal, Sample, Standardizer};
use crate::gold::{gold, Provenance};
use crate::nn::{
    self, clamp_prob, Activation, AdamConfig, AdamOutcome, AdamState, DenseLayer, ForwardCache,
    Mlp, MlpGrad, Tensor,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub latent_dim: usize,
    pub hidden_g: Vec<usize>,
    pub hidden_d: Vec<usize>,
    pub spectral_norm: bool,
    /// Start both discriminator heads at zero (outputs 0.5 / uniform).
    pub zero_init_heads: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            latent_dim: 8,
            hidden_g: vec![64, 64],
            hidden_d: vec![64, 64],
            spectral_norm: true,
            zero_init_heads: true,
        }
    }
}

/// How generated-sample terms are weighted by the GOLD score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFn {
    pub beta: f64,
    /// Read `β = 0` literally as `x⁰ = sign(x)` instead of "no re-weighting".
    pub literal_zero: bool,
}

impl WeightFn {
    pub fn new(beta: f64) -> Self {
        WeightFn {
            beta,
            literal_zero: false,
        }
    }

    /// `|d|^β · sign(d)`; `≡ 1` for `β = 0` unless `literal_zero`.
    pub fn weight(&self, d: f64) -> f64 {
        if self.beta == 0.0 && !self.literal_zero {
            return 1.0;
        }
        if d < 0.0 {
            -(-d).powf(self.beta)
        } else if d > 0.0 {
            d.powf(self.beta)
        } else if self.beta == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn is_identity(&self) -> bool {
        self.beta == 0.0 && !self.literal_zero
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_c: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Cap on labeled samples per step; the labeled set is tiny in
    /// active-learning runs.
    pub labeled_batch_size: usize,
    pub baseline_epochs: usize,
    pub reweight_epochs: usize,
    pub beta_d: f64,
    pub beta_g: f64,
    pub literal_beta_zero: bool,
    pub seed: u64,
    pub adam_g: AdamConfig,
    pub adam_d: AdamConfig,
    pub sn_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_c: 0.1,
            epochs: 40,
            batch_size: 64,
            labeled_batch_size: 64,
            baseline_epochs: 20,
            reweight_epochs: 20,
            beta_d: 1.0,
            beta_g: 0.0,
            literal_beta_zero: false,
            seed: 0,
            adam_g: AdamConfig::default(),
            adam_d: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            sn_iterations: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_c >= 0.0) {
            return Err(Error::Config(format!(
                "train.lambda_c must be >= 0, got {}",
                self.lambda_c
            )));
        }
        if self.baseline_epochs + self.reweight_epochs != self.epochs {
            return Err(Error::Config(format!(
                "train.baseline_epochs ({}) + train.reweight_epochs ({}) must equal train.epochs ({})",
                self.baseline_epochs, self.reweight_epochs, self.epochs
            )));
        }
        if self.batch_size == 0 || self.labeled_batch_size == 0 {
            return Err(Error::Config(
                "train.batch_size and train.labeled_batch_size must be positive".into(),
            ));
        }
        if !(self.beta_d >= 0.0) || !(self.beta_g >= 0.0) {
            return Err(Error::Config(
                "train.beta_d and train.beta_g must be >= 0".into(),
            ));
        }
        if self.sn_iterations == 0 {
            return Err(Error::Config("train.sn_iterations must be >= 1".into()));
        }
        for (name, a) in [("adam_g", &self.adam_g), ("adam_d", &self.adam_d)] {
            if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
                return Err(Error::Config(format!(
                    "train.{name}: invalid Adam hyper-parameters"
                )));
            }
        }
        Ok(())
    }

    pub fn weight_d(&self) -> WeightFn {
        WeightFn {
            beta: self.beta_d,
            literal_zero: self.literal_beta_zero,
        }
    }

    pub fn weight_g(&self) -> WeightFn {
        WeightFn {
            beta: self.beta_g,
            literal_zero: self.literal_beta_zero,
        }
    }
}

/// Shared trunk plus real/generated and class heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub trunk: Mlp,
    pub head_g: Mlp,
    pub head_c: Mlp,
}

/// Discriminator outputs for a batch. `d_g` is clamped to
/// `[PROB_EPS, 1 − PROB_EPS]`; `d_c` rows are exact softmax outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscOutput {
    pub d_g: Vec<f64>,
    pub d_c: Tensor,
}

impl DiscOutput {
    pub fn d_c_at(&self, i: usize, class: usize) -> f64 {
        self.d_c.get(i, class)
    }
}

pub(crate) struct DiscCache {
    trunk: ForwardCache,
    head_g: ForwardCache,
    head_c: ForwardCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscGrad {
    pub trunk: MlpGrad,
    pub head_g: MlpGrad,
    pub head_c: MlpGrad,
    pub input: Tensor,
}

impl DiscGrad {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.trunk.flat();
        v.extend(self.head_g.flat());
        v.extend(self.head_c.flat());
        v
    }
}

impl Discriminator {
    pub fn init<R: rand::Rng + ?Sized>(
        arch: &ArchConfig,
        data_dim: usize,
        class_count: usize,
        rng: &mut R,
    ) -> Self {
        let mut layers = Vec::new();
        let mut prev = data_dim;
        for &h in &arch.hidden_d {
            layers.push(DenseLayer::init(
                prev,
                h,
                Activation::LeakyRelu,
                arch.spectral_norm,
                rng,
            ));
            prev = h;
        }
        if layers.is_empty() {
            // keep the trunk non-empty: identity pass-through
            layers.push(
                DenseLayer::new(
                    Tensor::identity(data_dim),
                    vec![0.0; data_dim],
                    Activation::Identity,
                )
                .expect("square identity"),
            );
        }
        let head = |out: usize, act: Activation, rng: &mut R| {
            if arch.zero_init_heads {
                DenseLayer::zeros(prev, out, act)
            } else {
                DenseLayer::init(prev, out, act, false, rng)
            }
        };
        let head_g = head(1, Activation::Sigmoid, rng);
        let head_c = head(class_count, Activation::Softmax, rng);
        Discriminator {
            trunk: Mlp::new(layers).expect("chained dims"),
            head_g: Mlp::new(vec![head_g]).expect("single layer"),
            head_c: Mlp::new(vec![head_c]).expect("single layer"),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    pub fn power_iterate(&mut self, iterations: usize) {
        self.trunk.power_iterate(iterations);
        self.head_g.power_iterate(iterations);
        self.head_c.power_iterate(iterations);
    }

    pub fn forward(&self, x: &Tensor) -> Result<DiscOutput> {
        let h = self.trunk.forward_par(x, 512)?;
        let g = self.head_g.forward(&h)?;
        let d_c = self.head_c.forward(&h)?;
        Ok(DiscOutput {
            d_g: g.data().iter().map(|&p| clamp_prob(p)).collect(),
            d_c,
        })
    }

    pub(crate) fn forward_cached(&self, x: &Tensor) -> Result<(DiscOutput, DiscCache)> {
        let (h, trunk) = self.trunk.forward_cached(x)?;
        let (g, head_g) = self.head_g.forward_cached(&h)?;
        let (d_c, head_c) = self.head_c.forward_cached(&h)?;
        Ok((
            DiscOutput {
                d_g: g.data().to_vec(),
                d_c,
            },
            DiscCache {
                trunk,
                head_g,
                head_c,
            },
        ))
    }

    pub(crate) fn backward(
        &self,
        cache: &DiscCache,
        grad_dg: &[f64],
        grad_dc: &Tensor,
    ) -> Result<DiscGrad> {
        let gg = Tensor::from_vec(grad_dg.len(), 1, grad_dg.to_vec())?;
        let head_g = self.head_g.backward(&cache.head_g, &gg)?;
        let head_c = self.head_c.backward(&cache.head_c, grad_dc)?;
        let mut gh = head_g.input.clone();
        gh.data_mut()
            .iter_mut()
            .zip(head_c.input.data())
            .for_each(|(a, b)| *a += b);
        let trunk = self.trunk.backward(&cache.trunk, &gh)?;
        let input = trunk.input.clone();
        Ok(DiscGrad {
            trunk,
            head_g,
            head_c,
            input,
        })
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = self.trunk.params_flat();
        v.extend(self.head_g.params_flat());
        v.extend(self.head_c.params_flat());
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let a = self.trunk.param_count();
        let b = self.head_g.param_count();
        let c = self.head_c.param_count();
        if flat.len() != a + b + c {
            return Err(Error::dim(
                "Discriminator::set_params_flat",
                a + b + c,
                flat.len(),
            ));
        }
        self.trunk.set_params_flat(&flat[..a])?;
        self.head_g.set_params_flat(&flat[a..a + b])?;
        self.head_c.set_params_flat(&flat[a + b..])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscOptimizer {
    pub trunk: AdamState,
    pub head_g: AdamState,
    pub head_c: AdamState,
}

impl DiscOptimizer {
    fn new(cfg: AdamConfig, d: &Discriminator) -> Self {
        DiscOptimizer {
            trunk: AdamState::new(cfg, &d.trunk.param_shapes()),
            head_g: AdamState::new(cfg, &d.head_g.param_shapes()),
            head_c: AdamState::new(cfg, &d.head_c.param_shapes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CGanModel {
    pub generator: Mlp,
    pub discriminator: Discriminator,
    pub g_opt: AdamState,
    pub d_opt: DiscOptimizer,
    pub arch: ArchConfig,
    pub data_dim: usize,
    pub class_count: usize,
}

/// Per-step losses and discriminator statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub d_loss: f64,
    pub g_loss: f64,
    pub ac_loss: f64,
    pub mean_dg_real: f64,
    pub mean_dg_fake: f64,
    pub mean_gold_fake: f64,
}

/// Which discriminator loss terms to include; both in training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub gan: bool,
    pub ac: bool,
}

impl LossTerms {
    pub const ALL: LossTerms = LossTerms {
        gan: true,
        ac: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscLoss {
    pub gan: f64,
    pub ac: f64,
    pub total: f64,
    pub mean_dg_real: f64,
    pub mean_dg_fake: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenLoss {
    pub gan: f64,
    pub ac: f64,
    pub total: f64,
}

/// Real inputs to one step: labeled samples enter both loss families,
/// unlabeled only the real/generated one.
#[derive(Debug, Clone, Copy)]
pub struct RealBatch<'a> {
    pub labeled: &'a [Sample],
    pub unlabeled: &'a [Vec<f64>],
}

/// Latent codes and classes for the generated half of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub z: Tensor,
    pub classes: Vec<usize>,
}

impl LatentBatch {
    pub fn sample<R: rand::Rng + ?Sized>(
        n: usize,
        latent_dim: usize,
        class_count: usize,
        rng: &mut R,
    ) -> Self {
        let classes = (0..n).map(|_| rng.random_range(0..class_count)).collect();
        Self::sample_for(classes, latent_dim, rng)
    }

    pub fn sample_for<R: rand::Rng + ?Sized>(
        classes: Vec<usize>,
        latent_dim: usize,
        rng: &mut R,
    ) -> Self {
        let data = (0..classes.len() * latent_dim)
            .map(|_| standard_normal(rng))
            .collect();
        LatentBatch {
            z: Tensor::from_vec(classes.len(), latent_dim, data).expect("sized"),
            classes,
        }
    }
}

/// `−log` of a clamped probability and its derivative (zero where the
/// clamp is active).
#[inline]
fn neg_log(p: f64) -> (f64, f64) {
    let c = clamp_prob(p);
    let d = if p == c { -1.0 / p } else { 0.0 };
    (-c.ln(), d)
}

/// `(discriminator_loss, generator_loss)` for the real/generated head:
/// `mean(−log d_real) + mean(−log(1 − d_fake))` and the non-saturating
/// `mean(−log d_fake)`.
pub fn loss_gan(d_g_real: &[f64], d_g_fake: &[f64]) -> (f64, f64) {
    let real = mean(d_g_real.iter().map(|&p| neg_log(p).0));
    let fake = mean(d_g_fake.iter().map(|&p| neg_log(1.0 - p).0));
    let gen = mean(d_g_fake.iter().map(|&p| neg_log(p).0));
    (real + fake, gen)
}

/// Cross-entropy on real labeled samples plus `λ_c`-weighted cross-entropy
/// on generated samples.
pub fn loss_ac(
    d_c_real: &Tensor,
    c_real: &[usize],
    d_c_fake: &Tensor,
    c_fake: &[usize],
    lambda_c: f64,
) -> f64 {
    let real = mean(
        c_real
            .iter()
            .enumerate()
            .map(|(i, &c)| neg_log(d_c_real.get(i, c)).0),
    );
    let fake = mean(
        c_fake
            .iter()
            .enumerate()
            .map(|(i, &c)| neg_log(d_c_fake.get(i, c)).0),
    );
    real + lambda_c * fake
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// `[z | onehot(c)]`
pub fn generator_input(z: &Tensor, classes: &[usize], class_count: usize) -> Result<Tensor> {
    if z.rows() != classes.len() {
        return Err(Error::dim(
            "generator_input classes",
            z.rows(),
            classes.len(),
        ));
    }
    let mut onehot = Tensor::zeros(classes.len(), class_count);
    for (i, &c) in classes.iter().enumerate() {
        if c >= class_count {
            return Err(Error::OutOfRange {
                index: c,
                len: class_count,
            });
        }
        onehot.set(i, c, 1.0);
    }
    z.hstack(&onehot)
}

impl CGanModel {
    pub fn new<R: rand::Rng + ?Sized>(
        arch: ArchConfig,
        data_dim: usize,
        class_count: usize,
        train: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if class_count == 0 || data_dim == 0 || arch.latent_dim == 0 {
            return Err(Error::Config(
                "data_dim, class_count and latent_dim must be positive".into(),
            ));
        }
        let mut layers = Vec::new();
        let mut prev = arch.latent_dim + class_count;
        for &h in &arch.hidden_g {
            layers.push(DenseLayer::init(prev, h, Activation::Relu, false, rng));
            prev = h;
        }
        layers.push(DenseLayer::init(
            prev,
            data_dim,
            Activation::Identity,
            false,
            rng,
        ));
        let generator = Mlp::new(layers)?;
        let discriminator = Discriminator::init(&arch, data_dim, class_count, rng);
        Ok(CGanModel {
            g_opt: AdamState::new(train.adam_g, &generator.param_shapes()),
            d_opt: DiscOptimizer::new(train.adam_d, &discriminator),
            generator,
            discriminator,
            arch,
            data_dim,
            class_count,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    /// Deterministic map `(z, c) ↦ x`.
    pub fn generate(&self, z: &Tensor, classes: &[usize]) -> Result<Tensor> {
        if z.cols() != self.latent_dim() {
            return Err(Error::dim("generate latent", self.latent_dim(), z.cols()));
        }
        let input = generator_input(z, classes, self.class_count)?;
        self.generator.forward_par(&input, 512)
    }

    /// Fresh latents for the given classes, returned as labeled samples.
    pub fn generate_samples<R: rand::Rng + ?Sized>(
        &self,
        classes: Vec<usize>,
        rng: &mut R,
    ) -> Result<Vec<Sample>> {
        let lb = LatentBatch::sample_for(classes, self.latent_dim(), rng);
        let x = self.generate(&lb.z, &lb.classes)?;
        Ok(x.iter_rows()
            .zip(lb.classes)
            .map(|(r, c)| Sample::new(r.to_vec(), c))
            .collect())
    }

    pub fn discriminate(&self, x: &Tensor) -> Result<DiscOutput> {
        if x.cols() != self.data_dim {
            return Err(Error::dim("discriminate input", self.data_dim, x.cols()));
        }
        self.discriminator.forward(x)
    }

    /// Replace the discriminator and its optimizer state; the generator is
    /// untouched.
    pub fn reinit_discriminator<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) {
        self.discriminator = Discriminator::init(&self.arch, self.data_dim, self.class_count, rng);
        self.d_opt = DiscOptimizer::new(self.d_opt.trunk.config, &self.discriminator);
    }

    /// Discriminator loss and gradient on `real ∪ fake`. `weights`, when
    /// given, scale each generated sample's terms.
    pub fn discriminator_loss_grad(
        &self,
        real: RealBatch<'_>,
        fake_x: &Tensor,
        fake_classes: &[usize],
        lambda_c: f64,
        weights: Option<&[f64]>,
        terms: LossTerms,
    ) -> Result<(DiscLoss, DiscGrad)> {
        let n_lab = real.labeled.len();
        let n_real = n_lab + real.unlabeled.len();
        let n_fake = fake_x.rows();
        if fake_classes.len() != n_fake {
            return Err(Error::dim("fake classes", n_fake, fake_classes.len()));
        }
        if let Some(w) = weights {
            if w.len() != n_fake {
                return Err(Error::dim("sample weights", n_fake, w.len()));
            }
        }
        let mut rows: Vec<&[f64]> = real.labeled.iter().map(|s| s.x.as_slice()).collect();
        rows.extend(real.unlabeled.iter().map(Vec::as_slice));
        let real_x = Tensor::from_rows(&rows, self.data_dim)?;
        let x = real_x.vstack(fake_x)?;
        let (out, cache) = self.discriminator.forward_cached(&x)?;

        let mut grad_dg = vec![0.0; n_real + n_fake];
        let mut grad_dc = Tensor::zeros(n_real + n_fake, self.class_count);
        let (mut gan_real, mut gan_fake, mut ac_real, mut ac_fake) = (0.0, 0.0, 0.0, 0.0);
        let w = |i: usize| weights.map_or(1.0, |w| w[i]);

        if n_real > 0 {
            let k = 1.0 / n_real as f64;
            for i in 0..n_real {
                let (l, d) = neg_log(out.d_g[i]);
                gan_real += l;
                if terms.gan {
                    grad_dg[i] = k * d;
                }
            }
            gan_real *= k;
        }
        if n_lab > 0 {
            let k = 1.0 / n_lab as f64;
            for (i, s) in real.labeled.iter().enumerate() {
                if s.class >= self.class_count {
                    return Err(Error::OutOfRange {
                        index: s.class,
                        len: self.class_count,
                    });
                }
                let (l, d) = neg_log(out.d_c.get(i, s.class));
                ac_real += l;
                if terms.ac {
                    grad_dc.set(i, s.class, k * d);
                }
            }
            ac_real *= k;
        }
        if n_fake > 0 {
            let k = 1.0 / n_fake as f64;
            for (j, &c) in fake_classes.iter().enumerate() {
                let i = n_real + j;
                let wj = w(j);
                // −log(1 − p): derivative w.r.t. p is −(d/dq)(−log q) at q = 1 − p
                let (l, dq) = neg_log(1.0 - out.d_g[i]);
                gan_fake += wj * l;
                if terms.gan {
                    grad_dg[i] = -k * wj * dq;
                }
                let (l, d) = neg_log(out.d_c.get(i, c));
                ac_fake += wj * l;
                if terms.ac {
                    grad_dc.set(i, c, k * lambda_c * wj * d);
                }
            }
            gan_fake *= k;
            ac_fake *= k;
        }

        let gan = gan_real + gan_fake;
        let ac = ac_real + lambda_c * ac_fake;
        let total = f64::from(u8::from(terms.gan)) * gan + f64::from(u8::from(terms.ac)) * ac;
        let grad = self.discriminator.backward(&cache, &grad_dg, &grad_dc)?;
        Ok((
            DiscLoss {
                gan,
                ac,
                total,
                mean_dg_real: mean(out.d_g[..n_real].iter().map(|&p| clamp_prob(p))),
                mean_dg_fake: mean(out.d_g[n_real..].iter().map(|&p| clamp_prob(p))),
            },
            grad,
        ))
    }

    /// Non-saturating generator loss and gradient w.r.t. generator
    /// parameters, through the (frozen) discriminator.
    pub fn generator_loss_grad(
        &self,
        latent: &LatentBatch,
        lambda_c: f64,
        weights: Option<&[f64]>,
    ) -> Result<(GenLoss, MlpGrad, DiscOutput)> {
        let n = latent.classes.len();
        if let Some(w) = weights {
            if w.len() != n {
                return Err(Error::dim("sample weights", n, w.len()));
            }
        }
        let input = generator_input(&latent.z, &latent.classes, self.class_count)?;
        let (x, g_cache) = self.generator.forward_cached(&input)?;
        let (out, d_cache) = self.discriminator.forward_cached(&x)?;
        let k = if n > 0 { 1.0 / n as f64 } else { 0.0 };
        let mut grad_dg = vec![0.0; n];
        let mut grad_dc = Tensor::zeros(n, self.class_count);
        let (mut gan, mut ac) = (0.0, 0.0);
        for (i, &c) in latent.classes.iter().enumerate() {
            let wi = weights.map_or(1.0, |w| w[i]);
            let (l, d) = neg_log(out.d_g[i]);
            gan += wi * l;
            grad_dg[i] = k * wi * d;
            let (l, d) = neg_log(out.d_c.get(i, c));
            ac += wi * l;
            grad_dc.set(i, c, k * lambda_c * wi * d);
        }
        gan *= k;
        ac *= k;
        let d_grad = self.discriminator.backward(&d_cache, &grad_dg, &grad_dc)?;
        let g_grad = self.generator.backward(&g_cache, &d_grad.input)?;
        let clamped = DiscOutput {
            d_g: out.d_g.iter().map(|&p| clamp_prob(p)).collect(),
            d_c: out.d_c,
        };
        Ok((
            GenLoss {
                gan,
                ac,
                total: gan + lambda_c * ac,
            },
            g_grad,
            clamped,
        ))
    }

    fn apply_disc_grad(&mut self, grad: &DiscGrad) -> Result<()> {
        let d = &mut self.discriminator;
        let o = &mut self.d_opt;
        for outcome in [
            d.trunk.adam_step(&grad.trunk, &mut o.trunk)?,
            d.head_g.adam_step(&grad.head_g, &mut o.head_g)?,
            d.head_c.adam_step(&grad.head_c, &mut o.head_c)?,
        ] {
            if let AdamOutcome::Rejected {
                tensor,
                index,
                value,
            } = outcome
            {
                return Err(Error::NonFinite(format!(
                    "discriminator gradient tensor {tensor} index {index} = {value}"
                )));
            }
        }
        Ok(())
    }

    /// One discriminator update on a fixed batch with the generator frozen.
    pub fn discriminator_update(
        &mut self,
        real: RealBatch<'_>,
        fake_x: &Tensor,
        fake_classes: &[usize],
        lambda_c: f64,
        weights: Option<&[f64]>,
    ) -> Result<DiscLoss> {
        let (loss, grad) = self.discriminator_loss_grad(
            real,
            fake_x,
            fake_classes,
            lambda_c,
            weights,
            LossTerms::ALL,
        )?;
        if !loss.total.is_finite() {
            return Err(Error::NonFinite(format!("discriminator loss {loss:?}")));
        }
        self.apply_disc_grad(&grad)?;
        Ok(loss)
    }

    /// Per-sample GOLD scores of generated samples under the current
    /// discriminator.
    pub fn generated_gold(&self, out: &DiscOutput, classes: &[usize]) -> Vec<f64> {
        classes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                gold(out.d_g[i], out.d_c.get(i, c), Provenance::Generated)
                    .expect("generated provenance")
                    .combined
            })
            .collect()
    }

    fn step_with<R: rand::Rng + ?Sized>(
        &mut self,
        real: RealBatch<'_>,
        cfg: &TrainConfig,
        reweight: bool,
        rng: &mut R,
    ) -> Result<StepMetrics> {
        self.discriminator.power_iterate(cfg.sn_iterations);
        let latent = LatentBatch::sample(cfg.batch_size, self.latent_dim(), self.class_count, rng);
        let fake_x = self.generate(&latent.z, &latent.classes)?;

        let fake_out = self.discriminator.forward(&fake_x)?;
        let fake_gold = self.generated_gold(&fake_out, &latent.classes);
        let d_weights: Option<Vec<f64>> = if reweight {
            let wf = cfg.weight_d();
            Some(fake_gold.iter().map(|&d| wf.weight(d)).collect())
        } else {
            None
        };
        let d = self.discriminator_update(
            real,
            &fake_x,
            &latent.classes,
            cfg.lambda_c,
            d_weights.as_deref(),
        )?;

        let g_weights: Option<Vec<f64>> = if reweight {
            let wf = cfg.weight_g();
            Some(fake_gold.iter().map(|&d| wf.weight(d)).collect())
        } else {
            None
        };
        let (g, g_grad, _) =
            self.generator_loss_grad(&latent, cfg.lambda_c, g_weights.as_deref())?;
        if !g.total.is_finite() {
            return Err(Error::NonFinite(format!(
                "generator loss {g:?}, discriminator {d:?}"
            )));
        }
        if let AdamOutcome::Rejected {
            tensor,
            index,
            value,
        } = self.generator.adam_step(&g_grad, &mut self.g_opt)?
        {
            return Err(Error::NonFinite(format!(
                "generator gradient tensor {tensor} index {index} = {value}; losses d={d:?} g={g:?}"
            )));
        }
        Ok(StepMetrics {
            d_loss: d.total,
            g_loss: g.total,
            ac_loss: d.ac,
            mean_dg_real: d.mean_dg_real,
            mean_dg_fake: d.mean_dg_fake,
            mean_gold_fake: mean(fake_gold.into_iter()),
        })
    }

    /// Baseline step: one discriminator update, then one generator update.
    pub fn train_step<R: rand::Rng + ?Sized>(
        &mut self,
        real: RealBatch<'_>,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<StepMetrics> {
        self.step_with(real, cfg, false, rng)
    }

    /// Step where generated-sample terms carry GOLD weights (`β_d` for the
    /// discriminator, `β_g` for the generator). Both sets come from the same
    /// per-sample scores, taken from the discriminator before its update,
    /// and are treated as constants.
    pub fn reweighted_train_step<R: rand::Rng + ?Sized>(
        &mut self,
        real: RealBatch<'_>,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<StepMetrics> {
        self.step_with(real, cfg, true, rng)
    }
}

/// Draws per-step real batches: unlabeled (or, when there is no unlabeled
/// data, labeled) samples cycle through shuffled epochs; labeled samples
/// are drawn without replacement up to the labeled cap.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    order: Vec<usize>,
    cursor: usize,
}

impl BatchPlan {
    pub fn new() -> Self {
        BatchPlan {
            order: Vec::new(),
            cursor: 0,
        }
    }

    /// Steps needed to pass once over the larger of the two sets.
    pub fn steps_per_epoch(labeled: usize, unlabeled: usize, batch: usize) -> usize {
        let n = if unlabeled > 0 { unlabeled } else { labeled };
        n.div_ceil(batch.max(1)).max(1)
    }

    pub fn next<R: rand::Rng + ?Sized>(
        &mut self,
        labeled: &[Sample],
        unlabeled: &[Vec<f64>],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> (Vec<Sample>, Vec<Vec<f64>>) {
        use rand::seq::{index, SliceRandom};
        let stream_len = if unlabeled.is_empty() {
            labeled.len()
        } else {
            unlabeled.len()
        };
        let mut picked = Vec::with_capacity(cfg.batch_size);
        while picked.len() < cfg.batch_size.min(stream_len) {
            if self.cursor >= self.order.len() || self.order.len() != stream_len {
                self.order = (0..stream_len).collect();
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            picked.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        if unlabeled.is_empty() {
            (
                picked.into_iter().map(|i| labeled[i].clone()).collect(),
                Vec::new(),
            )
        } else {
            let n_lab = cfg.labeled_batch_size.min(labeled.len());
            let lab = index::sample(rng, labeled.len(), n_lab)
                .into_iter()
                .map(|i| labeled[i].clone())
                .collect();
            (
                lab,
                picked.into_iter().map(|i| unlabeled[i].clone()).collect(),
            )
        }
    }
}

impl Default for BatchPlan {
    fn default() -> Self {
        Self::new()
    }
}

pub const CGAN_MAGIC: &[u8; 8] = b"GOLDCGAN";
pub const CGAN_VERSION: u32 = 1;

/// Metadata stored alongside the networks in a model checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub latent_dim: usize,
    pub class_count: usize,
    pub data_dim: usize,
    pub config_hash: String,
    pub standardizer: Standardizer,
}

/// Model checkpoint: a `GOLDCGAN` header (version, latent dim, class
/// count, data dim, config hash, feature standardizer) followed by four
/// network checkpoints: generator, trunk, real/generated head, class head.
pub fn write_cgan<W: Write>(
    w: &mut W,
    model: &CGanModel,
    config_hash: &str,
    standardizer: &Standardizer,
) -> std::io::Result<()> {
    w.write_all(CGAN_MAGIC)?;
    w.write_all(&CGAN_VERSION.to_le_bytes())?;
    for v in [model.latent_dim(), model.class_count, model.data_dim] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&(config_hash.len() as u32).to_le_bytes())?;
    w.write_all(config_hash.as_bytes())?;
    for (m, s) in standardizer.mean.iter().zip(&standardizer.std) {
        w.write_all(&m.to_le_bytes())?;
        w.write_all(&s.to_le_bytes())?;
    }
    nn::write_network(w, &model.generator)?;
    nn::write_network(w, &model.discriminator.trunk)?;
    nn::write_network(w, &model.discriminator.head_g)?;
    nn::write_network(w, &model.discriminator.head_c)
}

/// Inverse of [`write_cgan`]. Optimizer state is not stored; the loaded
/// model starts with fresh Adam moments using `adam`.
pub fn read_cgan<R: Read>(r: R, adam: AdamConfig) -> Result<(CGanModel, CheckpointHeader)> {
    use crate::nn::checkpoint_cursor as cur;
    let mut c = cur::Cursor::new(r);
    let magic = c.bytes::<8>("magic")?;
    if &magic != CGAN_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad model checkpoint magic".into(),
        });
    }
    let version = c.u32_le("version")?;
    if version != CGAN_VERSION {
        return Err(c.fail(format!("unsupported model checkpoint version {version}")));
    }
    let latent_dim = c.u32_le("latent dim")? as usize;
    let class_count = c.u32_le("class count")? as usize;
    let data_dim = c.u32_le("data dim")? as usize;
    let hash_len = c.u32_le("hash length")? as usize;
    if hash_len > 256 {
        return Err(c.fail("config hash too long"));
    }
    let mut hash = vec![0u8; hash_len];
    for b in hash.iter_mut() {
        *b = c.bytes::<1>("config hash")?[0];
    }
    let config_hash = String::from_utf8(hash).map_err(|_| c.fail("config hash is not UTF-8"))?;
    let mut standardizer = Standardizer::identity(data_dim);
    for i in 0..data_dim {
        standardizer.mean[i] = c.f64_le("standardizer")?;
        standardizer.std[i] = c.f64_le("standardizer")?;
    }
    let generator = cur::read_network_from(&mut c)?;
    let trunk = cur::read_network_from(&mut c)?;
    let head_g = cur::read_network_from(&mut c)?;
    let head_c = cur::read_network_from(&mut c)?;
    if generator.in_dim() != latent_dim + class_count
        || generator.out_dim() != data_dim
        || trunk.in_dim() != data_dim
        || head_g.out_dim() != 1
        || head_c.out_dim() != class_count
    {
        return Err(c.fail("network dimensions disagree with header"));
    }
    let arch = ArchConfig {
        latent_dim,
        hidden_g: generator.layers[..generator.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim())
            .collect(),
        hidden_d: trunk.layers.iter().map(|l| l.out_dim()).collect(),
        spectral_norm: trunk.layers.iter().any(|l| l.spectral.is_some()),
        zero_init_heads: true,
    };
    let discriminator = Discriminator {
        trunk,
        head_g,
        head_c,
    };
    let model = CGanModel {
        g_opt: AdamState::new(adam, &generator.param_shapes()),
        d_opt: DiscOptimizer::new(adam, &discriminator),
        generator,
        discriminator,
        arch,
        data_dim,
        class_count,
    };
    Ok((
        model,
        CheckpointHeader {
            latent_dim,
            class_count,
            data_dim,
            config_hash,
            standardizer,
        },
    ))
}
