use serde::{Deserialize, Serialize};

use crate::cgan::{CGanModel, LatentBatch};
use crate::data::Sample;
use crate::gold::{gold, rebalance, score_stats, GoldScore, Provenance};
use crate::nn::{logit, sigmoid, PROB_EPS};
use crate::{Error, Result};

/// Mean acceptance rate below which a candidate batch counts as starved.
pub const STARVATION_RATE: f64 = 1e-4;
/// Consecutive starved batches before giving up.
pub const STARVATION_BATCHES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RejectionConfig {
    /// Percentile of the pulled-back logits used as the shift `γ`.
    pub p: f64,
    pub batch_size: usize,
    pub target_accept_count: usize,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        RejectionConfig {
            p: 0.5,
            batch_size: 500,
            target_accept_count: 5000,
        }
    }
}

impl RejectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "rejection.p must be in [0, 1), got {}",
                self.p
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "rejection.batch_size must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// `f⁻¹(r)` for `r = exp(log_r)`, with `r = 1` pulled back as `1 − ε`.
pub fn pullback(log_r: f64) -> f64 {
    let log_r = log_r.min(0.0);
    let r = log_r.exp();
    if r >= 1.0 - PROB_EPS {
        return logit(1.0 - PROB_EPS);
    }
    log_r - (-log_r.exp_m1()).ln()
}

/// Shifted acceptance probability `f(f⁻¹(r) − γ)` where
/// `r = exp(score.combined − log_m)`. `log_m` is the log of the batch
/// maximum of `exp(d_bal)`, so `r ≤ 1`. The result is clamped to
/// `[f64::MIN_POSITIVE, 1 − ε]`.
pub fn acceptance_rate(score: &GoldScore, log_m: f64, gamma: f64) -> Result<f64> {
    let log_r = score.combined - log_m;
    if log_r > 1e-12 || log_r.is_nan() {
        return Err(Error::State(format!(
            "score {} exceeds log M = {log_m}",
            score.combined
        )));
    }
    Ok(shift(pullback(log_r), gamma))
}

fn shift(logit_r: f64, gamma: f64) -> f64 {
    sigmoid(logit_r - gamma).clamp(f64::MIN_POSITIVE, 1.0 - PROB_EPS)
}

/// Linear interpolation between order statistics at `h = p·(n − 1)`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::State("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("quantile level {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Shift for a batch of pulled-back logits. `p = 0` means no shift
/// toward rejection at all: every candidate is accepted up to the clamp.
pub fn gamma_for(logits: &[f64], p: f64) -> Result<f64> {
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    quantile(logits, p)
}

/// Per-class counts summing to `total`, as even as possible.
pub fn balanced_targets(total: usize, class_count: usize) -> Vec<usize> {
    (0..class_count)
        .map(|k| total / class_count + usize::from(k < total % class_count))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionOutcome {
    pub accepted: Vec<Sample>,
    /// Balanced score of each accepted sample, within its batch.
    pub accepted_scores: Vec<f64>,
    pub candidates: usize,
    pub batches: usize,
    pub mean_candidate_score: f64,
    pub mean_accepted_score: f64,
    /// Batches scored with the raw estimator because `σ_C` was zero.
    pub raw_fallback_batches: usize,
}

/// Balanced scores of one generated batch, or raw scores when the
/// conditional spread is zero.
pub fn score_candidates(
    model: &CGanModel,
    latent: &LatentBatch,
) -> Result<(Vec<Sample>, Vec<GoldScore>, bool)> {
    let x = model.generate(&latent.z, &latent.classes)?;
    let out = model.discriminate(&x)?;
    let raw: Vec<GoldScore> = latent
        .classes
        .iter()
        .enumerate()
        .map(|(i, &c)| Ok(gold(out.d_g[i], out.d_c_at(i, c), Provenance::Generated)?.with_class(c)))
        .collect::<Result<_>>()?;
    let samples = x
        .iter_rows()
        .zip(&latent.classes)
        .map(|(r, &c)| Sample::new(r.to_vec(), c))
        .collect();
    match score_stats(&raw)?.ratio() {
        Ok(ratio) => Ok((
            samples,
            raw.iter().map(|s| rebalance(s, ratio)).collect(),
            false,
        )),
        Err(e) => {
            log::warn!("{e}; scoring batch with the raw estimator");
            Ok((samples, raw, true))
        }
    }
}

/// Draw generated samples until every class has `class_targets[c]`
/// accepted samples. Candidates are scored with the balanced estimator
/// on per-batch statistics, `M` is the batch maximum, and `γ` is the
/// `p`-quantile of the batch's pulled-back logits.
pub fn rejection_sample<R: rand::Rng + ?Sized>(
    model: &CGanModel,
    class_targets: &[usize],
    cfg: &RejectionConfig,
    rng: &mut R,
) -> Result<RejectionOutcome> {
    cfg.validate()?;
    if class_targets.len() != model.class_count {
        return Err(Error::dim(
            "class targets",
            model.class_count,
            class_targets.len(),
        ));
    }
    let mut remaining = class_targets.to_vec();
    let mut out = RejectionOutcome {
        accepted: Vec::new(),
        accepted_scores: Vec::new(),
        candidates: 0,
        batches: 0,
        mean_candidate_score: 0.0,
        mean_accepted_score: 0.0,
        raw_fallback_batches: 0,
    };
    let mut candidate_sum = 0.0;
    let mut starved = 0usize;
    loop {
        let needing: Vec<usize> = (0..remaining.len()).filter(|&k| remaining[k] > 0).collect();
        if needing.is_empty() {
            break;
        }
        let classes = (0..cfg.batch_size)
            .map(|i| needing[i % needing.len()])
            .collect();
        let latent = LatentBatch::sample_for(classes, model.latent_dim(), rng);
        let (samples, scores, fallback) = score_candidates(model, &latent)?;
        out.raw_fallback_batches += usize::from(fallback);
        out.batches += 1;
        out.candidates += samples.len();
        candidate_sum += scores.iter().map(|s| s.combined).sum::<f64>();

        let log_m = scores
            .iter()
            .map(|s| s.combined)
            .fold(f64::NEG_INFINITY, f64::max);
        let logits: Vec<f64> = scores
            .iter()
            .map(|s| pullback(s.combined - log_m))
            .collect();
        let gamma = gamma_for(&logits, cfg.p)?;
        let rates: Vec<f64> = logits.iter().map(|&l| shift(l, gamma)).collect();
        let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
        starved = if mean_rate < STARVATION_RATE {
            starved + 1
        } else {
            0
        };
        if starved >= STARVATION_BATCHES {
            return Err(Error::Starvation(format!(
                "mean acceptance rate below {STARVATION_RATE} for {STARVATION_BATCHES} consecutive batches at p = {}; use a lower p",
                cfg.p
            )));
        }
        for ((sample, score), rate) in samples.into_iter().zip(&scores).zip(rates) {
            let u: f64 = rng.random();
            if u < rate && remaining[sample.class] > 0 {
                remaining[sample.class] -= 1;
                out.accepted_scores.push(score.combined);
                out.accepted.push(sample);
            }
        }
    }
    out.mean_candidate_score = candidate_sum / out.candidates.max(1) as f64;
    out.mean_accepted_score =
        out.accepted_scores.iter().sum::<f64>() / out.accepted_scores.len().max(1) as f64;
    Ok(out)
}
