use serde::{Deserialize, Serialize};

use crate::cgan::{BatchPlan, CGanModel, RealBatch, StepMetrics, TrainConfig};
use crate::data::{derive_seed, seeded, Sample};
use crate::eval::{log_trend, TrendLog};
use crate::Result;

pub use crate::cgan::WeightFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Baseline,
    Reweight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendOptions {
    pub interval: usize,
    pub probe_size: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingRecord {
    pub metrics: Vec<(Phase, StepMetrics)>,
    pub trend: TrendLog,
}

/// One GOLD-weighted step; see [`CGanModel::reweighted_train_step`].
pub fn reweighted_train_step<R: rand::Rng + ?Sized>(
    model: &mut CGanModel,
    real: RealBatch<'_>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepMetrics> {
    model.reweighted_train_step(real, cfg, rng)
}

/// Run `cfg.baseline_epochs` of baseline steps followed by
/// `cfg.reweight_epochs` of re-weighted steps (baseline steps throughout
/// when `reweight` is false). Trend probes draw from their own stream
/// so enabling them leaves training unchanged.
pub fn train_schedule<R: rand::Rng + ?Sized>(
    model: &mut CGanModel,
    labeled: &[Sample],
    unlabeled: &[Vec<f64>],
    cfg: &TrainConfig,
    reweight: bool,
    trend: Option<TrendOptions>,
    rng: &mut R,
) -> Result<TrainingRecord> {
    cfg.validate()?;
    let steps_per_epoch =
        BatchPlan::steps_per_epoch(labeled.len(), unlabeled.len(), cfg.batch_size);
    let mut plan = BatchPlan::new();
    let mut record = TrainingRecord::default();
    let mut probe_rng = seeded(derive_seed(cfg.seed, 0x7472_656e_64));
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let phase = if reweight && epoch >= cfg.baseline_epochs {
            Phase::Reweight
        } else {
            Phase::Baseline
        };
        for _ in 0..steps_per_epoch {
            let (lab, unl) = plan.next(labeled, unlabeled, cfg, rng);
            let real = RealBatch {
                labeled: &lab,
                unlabeled: &unl,
            };
            let m = match phase {
                Phase::Baseline => model.train_step(real, cfg, rng)?,
                Phase::Reweight => model.reweighted_train_step(real, cfg, rng)?,
            };
            record.metrics.push((phase, m));
            step += 1;
            if let Some(t) = trend {
                if t.interval > 0 && step % t.interval == 0 {
                    log_trend(
                        model,
                        t.probe_size,
                        step as u64,
                        &mut record.trend,
                        &mut probe_rng,
                    )?;
                }
            }
        }
    }
    Ok(record)
}
