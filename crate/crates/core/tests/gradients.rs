//! Analytic gradients against central finite differences.

mod common;

use common::gradcheck::{self, Worst, SEEDS};

fn assert_all(f: fn(u64) -> Worst) {
    for seed in 0..SEEDS {
        let w = f(seed);
        assert!(w.passes(), "{} (error {})", w.at, w.err);
    }
}

#[test]
fn every_activation_with_and_without_spectral_norm() {
    assert_all(gradcheck::layers);
}

#[test]
fn discriminator_losses_every_term_and_weighting() {
    assert_all(gradcheck::discriminator_losses);
}

#[test]
fn generator_loss_through_discriminator() {
    assert_all(gradcheck::generator_loss);
}

#[test]
fn softmax_cross_entropy_logit_gradient() {
    assert_all(gradcheck::softmax_cross_entropy_logits);
}
