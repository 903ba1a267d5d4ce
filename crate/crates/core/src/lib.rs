//! Gap-of-log-densities (GOLD) diagnostics for auxiliary-classifier
//! conditional GANs, together with the small dense-network engine they are
//! trained on and the three downstream uses of the score: example
//! re-weighting, rejection sampling and active-learning acquisition.
//!
//! Module map:
//!
//! - [`nn`]: tensors, dense layers, backprop, Adam, spectral norm, checkpoints
//! - [`data`]: Gaussian-mixture generator with exact densities, IDX files, pools
//! - [`cgan`]: ACGAN model, losses and the training step
//! - [`gold`]: the estimator in raw, balanced and unlabeled forms
//! - [`apps`]: re-weighting, rejection sampling, active learning
//! - [`eval`]: fitting capacity, GOLD trend logs, score histograms
//! - [`config`], [`runner`], [`plot`]: experiment plumbing used by the CLI

pub mod apps;
pub mod cgan;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gold;
pub mod nn;
pub mod par;
pub mod plot;
pub mod runner;
pub mod table;

pub use error::{Error, Result};
