use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cgan::CGanModel;
use crate::data::{Sample, SyntheticMixture};
use crate::gold::Provenance;
use crate::nn::{
    Activation, AdamConfig, AdamOutcome, AdamState, DenseLayer, Mlp, Tensor, PROB_EPS,
};
use crate::{Error, Result};

/// Evaluation-classifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    /// Per-epoch sample count of the full-scale protocol; only used to
    /// report the scale factor.
    pub reference_samples_per_epoch: usize,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            epochs: 40,
            samples_per_epoch: 2000,
            reference_samples_per_epoch: 10_000,
            hidden: vec![32, 32],
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.samples_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "eval.epochs, eval.samples_per_epoch and eval.batch_size must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "eval.lr must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }

    pub fn scale_factor(&self) -> f64 {
        self.samples_per_epoch as f64 / self.reference_samples_per_epoch as f64
    }
}

/// Where evaluation-classifier training samples come from.
pub trait SampleSource {
    /// `n` labeled training samples; classes balanced where the source
    /// allows it.
    fn draw(&mut self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<Sample>>;
    fn provenance(&self) -> Provenance;
}

/// Fresh generator samples with uniformly cycling conditioning classes.
pub struct GeneratorSource<'a> {
    pub model: &'a CGanModel,
}

impl SampleSource for GeneratorSource<'_> {
    fn draw(&mut self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<Sample>> {
        let k = self.model.class_count;
        let mut classes: Vec<usize> = (0..n).map(|i| i % k).collect();
        classes.shuffle(rng);
        self.model.generate_samples(classes, rng)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Generated
    }
}

/// A fixed sample set, reshuffled and cycled.
pub struct FixedSource {
    samples: Vec<Sample>,
    provenance: Provenance,
    order: Vec<usize>,
    cursor: usize,
}

impl FixedSource {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::State("fixed sample source is empty".into()));
        }
        Ok(FixedSource {
            samples,
            provenance,
            order: Vec::new(),
            cursor: 0,
        })
    }
}

impl SampleSource for FixedSource {
    fn draw(&mut self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor >= self.order.len() {
                self.order = (0..self.samples.len()).collect();
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.samples[self.order[self.cursor]].clone());
            self.cursor += 1;
        }
        Ok(out)
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Exact draws from a known mixture, mapped through `transform`.
pub struct MixtureSource<'a> {
    pub mixture: &'a SyntheticMixture,
    pub transform: Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>,
}

impl SampleSource for MixtureSource<'_> {
    fn draw(&mut self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<Sample>> {
        Ok(self
            .mixture
            .sample(n, rng)
            .into_iter()
            .map(|s| Sample::new((self.transform)(&s.x), s.class))
            .collect())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Real
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittingCapacityReport {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub per_class_count: Vec<usize>,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub scale_factor: f64,
    pub seed: u64,
    /// Test accuracy after each classifier epoch.
    pub curve: Vec<f64>,
    pub training_provenance: Provenance,
    pub degenerate_generator: bool,
    pub near_chance: bool,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Classifier on `dim` inputs with `class_count` logits.
pub fn classifier(
    dim: usize,
    class_count: usize,
    hidden: &[usize],
    rng: &mut dyn rand::RngCore,
) -> Result<Mlp> {
    let mut layers = Vec::new();
    let mut prev = dim;
    for &h in hidden {
        layers.push(DenseLayer::init(prev, h, Activation::Relu, false, rng));
        prev = h;
    }
    layers.push(DenseLayer::init(
        prev,
        class_count,
        Activation::Identity,
        false,
        rng,
    ));
    Mlp::new(layers)
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Tensor, classes: &[usize]) -> (f64, Tensor) {
    let n = logits.rows().max(1) as f64;
    let mut grad = Tensor::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (i, (row, &c)) in logits.iter_rows().zip(classes).enumerate() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        for (j, v) in row.iter().enumerate() {
            let p = (v - m).exp() / z;
            grad.set(i, j, (p - f64::from(u8::from(j == c))) / n);
        }
        loss += -(row[c] - m - z.ln()).max(PROB_EPS.ln());
    }
    (loss / n, grad)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// `(overall accuracy, per-class accuracy, per-class count)`
pub fn accuracy(
    net: &Mlp,
    test: &[Sample],
    class_count: usize,
) -> Result<(f64, Vec<f64>, Vec<usize>)> {
    let dim = net.in_dim();
    let rows: Vec<&[f64]> = test.iter().map(|s| s.x.as_slice()).collect();
    let logits = net.forward_par(&Tensor::from_rows(&rows, dim)?, 512)?;
    let mut correct = vec![0usize; class_count];
    let mut count = vec![0usize; class_count];
    for (row, s) in logits.iter_rows().zip(test) {
        if s.class >= class_count {
            return Err(Error::OutOfRange {
                index: s.class,
                len: class_count,
            });
        }
        count[s.class] += 1;
        if argmax(row) == s.class {
            correct[s.class] += 1;
        }
    }
    let total: usize = count.iter().sum();
    let overall = correct.iter().sum::<usize>() as f64 / total.max(1) as f64;
    let per_class = correct
        .iter()
        .zip(&count)
        .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect();
    Ok((overall, per_class, count))
}

fn is_degenerate(samples: &[Sample]) -> bool {
    let first = &samples[0].x;
    samples
        .iter()
        .all(|s| s.x.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-9))
}

/// Train a fresh classifier only on samples from `source` and report its
/// accuracy on `test`.
pub fn fitting_capacity(
    source: &mut dyn SampleSource,
    test: &[Sample],
    class_count: usize,
    cfg: &EvalConfig,
    rng: &mut dyn rand::RngCore,
) -> Result<FittingCapacityReport> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::State(
            "fitting capacity needs a non-empty test set".into(),
        ));
    }
    let dim = test[0].x.len();
    let mut net = classifier(dim, class_count, &cfg.hidden, rng)?;
    let adam = AdamConfig {
        lr: cfg.lr,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let mut opt = AdamState::new(adam, &net.param_shapes());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut warnings = Vec::new();
    let mut degenerate = false;
    for epoch in 0..cfg.epochs {
        let batch = source.draw(cfg.samples_per_epoch, rng)?;
        if batch.iter().any(|s| s.x.len() != dim) {
            return Err(Error::dim(
                "training sample",
                dim,
                batch.iter().find(|s| s.x.len() != dim).unwrap().x.len(),
            ));
        }
        if epoch == 0 && is_degenerate(&batch) {
            degenerate = true;
            warnings
                .push("degenerate generator: all training samples identical within 1e-9".into());
        }
        for chunk in batch.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|s| s.x.as_slice()).collect();
            let classes: Vec<usize> = chunk.iter().map(|s| s.class).collect();
            let x = Tensor::from_rows(&rows, dim)?;
            let (logits, cache) = net.forward_cached(&x)?;
            let (_, grad) = softmax_cross_entropy(&logits, &classes);
            let g = net.backward(&cache, &grad)?;
            if let AdamOutcome::Rejected { .. } = net.adam_step(&g, &mut opt)? {
                return Err(Error::NonFinite("evaluation classifier gradient".into()));
            }
        }
        curve.push(accuracy(&net, test, class_count)?.0);
    }
    let (acc, per_class, counts) = accuracy(&net, test, class_count)?;
    let near_chance = acc < 1.0 / class_count as f64 + 0.05;
    if near_chance {
        warnings.push(format!(
            "accuracy {acc:.4} is near chance level {:.4}",
            1.0 / class_count as f64
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FittingCapacityReport {
        accuracy: acc,
        per_class_accuracy: per_class,
        per_class_count: counts,
        epochs: cfg.epochs,
        samples_per_epoch: cfg.samples_per_epoch,
        scale_factor: cfg.scale_factor(),
        seed: cfg.seed,
        curve,
        training_provenance: source.provenance(),
        degenerate_generator: degenerate,
        near_chance,
        warnings,
        config_hash: None,
    })
}

/// Fitting capacity of a generator; the classifier's randomness comes from
/// `cfg.seed`.
pub fn model_fitting_capacity(
    model: &CGanModel,
    test: &[Sample],
    cfg: &EvalConfig,
) -> Result<FittingCapacityReport> {
    let mut rng = crate::data::seeded(cfg.seed);
    fitting_capacity(
        &mut GeneratorSource { model },
        test,
        model.class_count,
        cfg,
        &mut rng,
    )
}
