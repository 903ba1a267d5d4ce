//! Minimal dense-network engine.

mod adam;
mod checkpoint;

/// Byte-level checkpoint reading shared with model checkpoints.
pub(crate) mod checkpoint_cursor {
    pub(crate) use super::checkpoint::{read_network_from, Cursor};
}
mod layer;
mod network;
mod tensor;

pub use adam::{AdamConfig, AdamOutcome, AdamState};
pub use checkpoint::{read_network, write_network, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layer::{Activation, DenseLayer, SpectralState, LEAKY_SLOPE, SPECTRAL_EPS};
pub use network::{ForwardCache, LayerGrad, Mlp, MlpGrad};
pub use tensor::Tensor;

/// Lower/upper clamp applied to probabilities before any logarithm.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`].
#[inline]
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}
