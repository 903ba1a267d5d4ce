//! GOLD applications: re-weighted training, rejection sampling, and
//! active learning.

mod active;
mod rejection;
mod reweight;

pub use active::{
    acquire_queries, active_learning_run, paired_trial, score_pool, sign_test, top_k, Acquisition,
    ActiveConfig, ActiveSetup, ActiveState, PairedTrial, PoolScores, RoundObserver, RoundRecord,
    SignTest,
};
pub use rejection::{
    acceptance_rate, balanced_targets, gamma_for, pullback, quantile, rejection_sample,
    score_candidates, RejectionConfig, RejectionOutcome, STARVATION_BATCHES, STARVATION_RATE,
};
pub use reweight::{
    reweighted_train_step, train_schedule, Phase, TrainingRecord, TrendOptions, WeightFn,
};
