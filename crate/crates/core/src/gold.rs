//! The gap-of-log-densities estimator.
//!
//! For a sample `x` with class `c` the discriminator supplies `D_G(x)` (real
//! vs generated) and `D_C(c|x)` (class posterior). The score is the
//! marginal log-odds `log D_G/(1−D_G)` plus a conditional term whose sign
//! depends on where the sample came from:
//!
//! | provenance | conditional term |
//! |------------|------------------|
//! | generated  | `+log D_C(c|x)` (≤ 0) |
//! | real       | `−log D_C(c|x)` (≥ 0) |
//! | unlabeled  | `H[D_C(·|x)]` (≥ 0) |
//!
//! The balanced forms rescale the conditional term by `σ_G/σ_C`, the ratio
//! of the population standard deviations of marginal terms and of
//! conditional-term magnitudes over a reference set.

use serde::{Deserialize, Serialize};

use crate::data::SyntheticMixture;
use crate::nn::PROB_EPS;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Generated,
    Unlabeled,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Generated => "generated",
            Provenance::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(Provenance::Real),
            "generated" => Some(Provenance::Generated),
            "unlabeled" => Some(Provenance::Unlabeled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldScore {
    pub marginal: f64,
    /// Signed contribution of the class term to `combined`.
    pub conditional: f64,
    pub combined: f64,
    pub provenance: Provenance,
    pub class: Option<usize>,
}

impl GoldScore {
    pub fn with_class(mut self, class: usize) -> Self {
        self.class = Some(class);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub sigma_g: f64,
    pub sigma_c: f64,
    pub n: usize,
}

impl ScoreStats {
    /// `σ_G / σ_C`, failing when `σ_C` is zero.
    pub fn ratio(&self) -> Result<f64> {
        if !(self.sigma_c > 0.0) {
            return Err(Error::DegenerateStats(format!(
                "sigma_c = {} over {} samples",
                self.sigma_c, self.n
            )));
        }
        Ok(self.sigma_g / self.sigma_c)
    }
}

/// `log(D_G / (1 − D_G))` with `D_G` clamped away from 0 and 1.
pub fn marginal_term(d_g: f64) -> f64 {
    let p = d_g.clamp(PROB_EPS, 1.0 - PROB_EPS);
    p.ln() - (-p).ln_1p()
}

fn log_class_prob(d_c: f64) -> f64 {
    d_c.clamp(PROB_EPS, 1.0).ln()
}

/// Raw estimator for a labeled sample.
pub fn gold(d_g: f64, d_c_at_label: f64, provenance: Provenance) -> Result<GoldScore> {
    let marginal = marginal_term(d_g);
    let conditional = match provenance {
        Provenance::Generated => log_class_prob(d_c_at_label),
        Provenance::Real => -log_class_prob(d_c_at_label),
        Provenance::Unlabeled => {
            return Err(Error::State(
                "unlabeled samples are scored with gold_unlabeled".into(),
            ))
        }
    };
    Ok(GoldScore {
        marginal,
        conditional,
        combined: marginal + conditional,
        provenance,
        class: None,
    })
}

/// Balanced estimator: the conditional term is scaled by `σ_G/σ_C`.
pub fn gold_balanced(
    d_g: f64,
    d_c_at_label: f64,
    provenance: Provenance,
    stats: &ScoreStats,
) -> Result<GoldScore> {
    let ratio = stats.ratio()?;
    let raw = gold(d_g, d_c_at_label, provenance)?;
    Ok(rebalance(&raw, ratio))
}

/// Rescale the conditional term of an already computed score.
pub fn rebalance(score: &GoldScore, ratio: f64) -> GoldScore {
    let conditional = ratio * score.conditional;
    GoldScore {
        conditional,
        combined: score.marginal + conditional,
        ..*score
    }
}

/// Shannon entropy in nats, `0·log 0 = 0`.
pub fn entropy(dist: &[f64]) -> f64 {
    -dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Estimator for an unlabeled real sample: marginal plus the entropy of the
/// class posterior, scaled by `σ_G/σ_C` when `stats` is given.
pub fn gold_unlabeled(d_g: f64, d_c: &[f64], stats: Option<&ScoreStats>) -> Result<GoldScore> {
    let marginal = marginal_term(d_g);
    let ratio = match stats {
        Some(s) => s.ratio()?,
        None => 1.0,
    };
    let conditional = match stats {
        Some(_) => ratio * entropy(d_c),
        None => entropy(d_c),
    };
    Ok(GoldScore {
        marginal,
        conditional,
        combined: marginal + conditional,
        provenance: Provenance::Unlabeled,
        class: None,
    })
}

fn population_std(values: impl Iterator<Item = f64>) -> f64 {
    // sorted and shifted by the minimum: exact zero for constant input and
    // independent of input order
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let shift = v[0];
    let mean = v.iter().map(|x| x - shift).sum::<f64>() / n;
    (v.iter().map(|x| (x - shift - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Population standard deviations of marginal terms and of
/// conditional-term magnitudes.
pub fn score_stats(scores: &[GoldScore]) -> Result<ScoreStats> {
    if scores.len() < 2 {
        return Err(Error::DegenerateStats(format!(
            "need at least 2 scores, got {}",
            scores.len()
        )));
    }
    Ok(ScoreStats {
        sigma_g: population_std(scores.iter().map(|s| s.marginal)),
        sigma_c: population_std(scores.iter().map(|s| s.conditional.abs())),
        n: scores.len(),
    })
}

/// Exact quantities at one point, for comparing the discriminator-based
/// surrogate against true densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheck {
    /// `log p_data(x, c) − log p_g(x, c)`
    pub true_gap: f64,
    /// `log p_data(x) − log p_g(x)`
    pub true_marginal: f64,
    /// `log p_data(c|x) − log p_g(c|x)`
    pub true_conditional: f64,
    /// Bayes-optimal `D_G*(x) = p_data / (p_data + p_g)`
    pub d_star: f64,
    /// `log(D*/(1 − D*))`
    pub surrogate_marginal: f64,
}

/// Build the optimal discriminator from two exact mixtures and evaluate
/// its marginal log-odds at `x`.
pub fn gold_oracle_check(
    data: &SyntheticMixture,
    model: &SyntheticMixture,
    x: &[f64],
    class: usize,
) -> Result<OracleCheck> {
    let pd = data.log_density(x)?;
    let pg = model.log_density(x)?;
    let joint_d = pd
        .log_joint
        .get(class)
        .copied()
        .unwrap_or(f64::NEG_INFINITY);
    let joint_g = pg
        .log_joint
        .get(class)
        .copied()
        .unwrap_or(f64::NEG_INFINITY);
    // log D* and log(1 − D*) from the two densities directly
    let denom = log_add_exp(pd.log_p, pg.log_p);
    let log_d = pd.log_p - denom;
    let log_1md = pg.log_p - denom;
    Ok(OracleCheck {
        true_gap: joint_d - joint_g,
        true_marginal: pd.log_p - pg.log_p,
        true_conditional: (joint_d - pd.log_p) - (joint_g - pg.log_p),
        d_star: log_d.exp(),
        surrogate_marginal: log_d - log_1md,
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
