mod common;

use gold_core::apps::train_schedule;
use gold_core::cgan::{
    loss_ac, loss_gan, ArchConfig, CGanModel, LatentBatch, LossTerms, RealBatch, TrainConfig,
};
use gold_core::data::{seeded, standard_normal, Sample, Standardizer, SyntheticMixture};
use gold_core::nn::{Tensor, PROB_EPS};
use std::f64::consts::LN_2;

fn model(seed: u64, zero_heads: bool) -> (CGanModel, gold_core::data::Rng) {
    let mut rng = seeded(seed);
    let arch = ArchConfig {
        zero_init_heads: zero_heads,
        ..ArchConfig::default()
    };
    let m = CGanModel::new(arch, 2, 2, &TrainConfig::default(), &mut rng).unwrap();
    (m, rng)
}

fn gaussian_batch(n: usize, rng: &mut gold_core::data::Rng) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            Sample::new(
                vec![standard_normal(rng) + i as f64 % 2.0, standard_normal(rng)],
                i % 2,
            )
        })
        .collect()
}

fn standardized_mixture(n: usize, seed: u64) -> Vec<Sample> {
    let raw = SyntheticMixture::default_six().sample(n, &mut seeded(seed));
    let st = Standardizer::fit(raw.iter().map(|s| s.x.as_slice())).unwrap();
    st.transform_samples(&raw)
}

#[test]
fn generator_is_deterministic_with_expected_shape() {
    let (m, mut rng) = model(0, true);
    let latent = LatentBatch::sample(7, m.latent_dim(), 2, &mut rng);
    let a = m.generate(&latent.z, &latent.classes).unwrap();
    let b = m.generate(&latent.z, &latent.classes).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.shape(), (7, 2));
}

#[test]
fn class_input_changes_output_after_training() {
    let (mut m, mut rng) = model(1, true);
    let data = standardized_mixture(640, 1);
    let cfg = TrainConfig {
        epochs: 2,
        baseline_epochs: 2,
        reweight_epochs: 0,
        ..TrainConfig::default()
    };
    train_schedule(&mut m, &data, &[], &cfg, false, None, &mut rng).unwrap();
    let z = LatentBatch::sample(5, m.latent_dim(), 2, &mut rng).z;
    let a = m.generate(&z, &[0; 5]).unwrap();
    let b = m.generate(&z, &[1; 5]).unwrap();
    assert!(a
        .data()
        .iter()
        .zip(b.data())
        .any(|(x, y)| (x - y).abs() > 1e-6));
}

#[test]
fn zero_initialized_heads_are_neutral() {
    let (m, mut rng) = model(2, true);
    let x = Tensor::from_vec(
        10,
        2,
        (0..20).map(|_| 5.0 * standard_normal(&mut rng)).collect(),
    )
    .unwrap();
    let out = m.discriminate(&x).unwrap();
    assert!(out.d_g.iter().all(|&p| p == 0.5));
    assert!(out.d_c.data().iter().all(|&p| p == 0.5));
}

#[test]
fn outputs_are_normalized_and_clamped() {
    let (m, _) = model(3, false);
    let x = Tensor::from_vec(3, 2, vec![1e6, -1e6, 0.0, 0.0, -1e8, 1e8]).unwrap();
    let out = m.discriminate(&x).unwrap();
    for i in 0..3 {
        let s: f64 = out.d_c.row(i).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        let p = out.d_g[i];
        assert!((PROB_EPS..=1.0 - PROB_EPS).contains(&p));
        assert!(p.ln().is_finite() && (1.0 - p).ln().is_finite());
    }
}

#[test]
fn closed_form_losses() {
    let (d, g) = loss_gan(&[0.5; 4], &[0.5; 4]);
    assert!((d - 2.0 * LN_2).abs() < 1e-12 && (g - LN_2).abs() < 1e-12);
    let (d, _) = loss_gan(&[1.0 - PROB_EPS; 3], &[PROB_EPS; 3]);
    assert!(d < 1e-6);
    let g: Vec<f64> = [0.1, 0.3, 0.6, 0.9]
        .iter()
        .map(|&p| loss_gan(&[0.5], &[p]).1)
        .collect();
    assert!(g.windows(2).all(|w| w[1] < w[0]));

    let uniform = Tensor::from_vec(2, 2, vec![0.5; 4]).unwrap();
    let sharp = Tensor::from_vec(2, 2, vec![0.01, 0.99, 0.3, 0.7]).unwrap();
    assert!((loss_ac(&uniform, &[0, 1], &sharp, &[0, 0], 0.0) - LN_2).abs() < 1e-12);
    assert!((loss_ac(&uniform, &[0, 1], &uniform, &[1, 0], 0.1) - 1.1 * LN_2).abs() < 1e-12);
}

#[test]
fn lambda_zero_generator_is_pure_gan_loss() {
    let (m, mut rng) = model(4, false);
    let latent = LatentBatch::sample(8, m.latent_dim(), 2, &mut rng);
    let (loss, _, out) = m.generator_loss_grad(&latent, 0.0, None).unwrap();
    let expect = out.d_g.iter().map(|p| -p.ln()).sum::<f64>() / 8.0;
    assert!((loss.total - expect).abs() < 1e-12);
}

#[test]
fn unlabeled_samples_leave_class_gradient_unchanged() {
    let (m, mut rng) = model(5, false);
    let lab = gaussian_batch(6, &mut rng);
    let unl: Vec<Vec<f64>> = (0..5)
        .map(|_| vec![standard_normal(&mut rng), standard_normal(&mut rng)])
        .collect();
    let fake = Tensor::from_vec(4, 2, (0..8).map(|_| standard_normal(&mut rng)).collect()).unwrap();
    let classes = [0, 1, 1, 0];
    let ac = LossTerms {
        gan: false,
        ac: true,
    };
    let grad = |u: &[Vec<f64>]| {
        let real = RealBatch {
            labeled: &lab,
            unlabeled: u,
        };
        let (l, g) = m
            .discriminator_loss_grad(real, &fake, &classes, 0.1, None, ac)
            .unwrap();
        (l.ac, g.flat())
    };
    let (la, ga) = grad(&[]);
    let (lb, gb) = grad(&unl);
    assert!((la - lb).abs() < 1e-12);
    for (a, b) in ga.iter().zip(&gb) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn fully_supervised_step_without_unlabeled_data() {
    let (mut m, mut rng) = model(6, true);
    let lab = gaussian_batch(32, &mut rng);
    let cfg = TrainConfig::default();
    let s = m
        .train_step(
            RealBatch {
                labeled: &lab,
                unlabeled: &[],
            },
            &cfg,
            &mut rng,
        )
        .unwrap();
    assert!(s.d_loss.is_finite() && s.g_loss.is_finite());
    // zero heads: the first step sees D_G = 0.5 everywhere
    assert_eq!((s.mean_dg_real, s.mean_dg_fake), (0.5, 0.5));
}

#[test]
fn discriminator_loss_decreases_on_fixed_batch() {
    for seed in 0..10 {
        let (mut m, mut rng) = model(100 + seed, false);
        m.d_opt.trunk.config.lr = 1e-4;
        m.d_opt.head_g.config.lr = 1e-4;
        m.d_opt.head_c.config.lr = 1e-4;
        let lab = gaussian_batch(32, &mut rng);
        let latent = LatentBatch::sample(32, m.latent_dim(), 2, &mut rng);
        let fake = m.generate(&latent.z, &latent.classes).unwrap();
        let real = RealBatch {
            labeled: &lab,
            unlabeled: &[],
        };
        let first = m
            .discriminator_update(real, &fake, &latent.classes, 0.1, None)
            .unwrap()
            .total;
        let mut last = first;
        for _ in 0..50 {
            last = m
                .discriminator_update(real, &fake, &latent.classes, 0.1, None)
                .unwrap()
                .total;
        }
        assert!(last < first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn reinit_resets_discriminator_only() {
    let (mut m, mut rng) = model(7, true);
    let data = standardized_mixture(640, 7);
    let cfg = TrainConfig {
        epochs: 1,
        baseline_epochs: 1,
        reweight_epochs: 0,
        ..TrainConfig::default()
    };
    train_schedule(&mut m, &data, &[], &cfg, false, None, &mut rng).unwrap();
    let latent = LatentBatch::sample(6, m.latent_dim(), 2, &mut rng);
    let before = m.generate(&latent.z, &latent.classes).unwrap();
    let (mut a, mut b) = (m.clone(), m.clone());
    a.reinit_discriminator(&mut seeded(42));
    b.reinit_discriminator(&mut seeded(42));
    assert_eq!(a.discriminator, b.discriminator);
    assert_eq!(a.generate(&latent.z, &latent.classes).unwrap(), before);
    let out = a.discriminate(&before).unwrap();
    assert!(out.d_g.iter().all(|&p| p == 0.5));
}

#[test]
fn beta_zero_step_is_bit_identical_to_baseline() {
    for seed in 0..5 {
        assert!(
            common::steps::beta_zero_matches_baseline(seed),
            "seed {seed}"
        );
    }
}

#[test]
fn generated_weight_scales_its_gan_term_exactly() {
    let (m, mut rng) = model(8, false);
    let lab = gaussian_batch(4, &mut rng);
    let real = RealBatch {
        labeled: &lab,
        unlabeled: &[],
    };
    let fake = Tensor::from_vec(1, 2, vec![0.3, -0.7]).unwrap();
    let gan = LossTerms {
        gan: true,
        ac: false,
    };
    let at = |w: f64| {
        m.discriminator_loss_grad(real, &fake, &[1], 0.1, Some(&[w]), gan)
            .unwrap()
    };
    let (l0, g0) = at(0.0);
    let (l1, g1) = at(1.0);
    let (l2, g2) = at(2.0);
    assert!(((l2.gan - l0.gan) - 2.0 * (l1.gan - l0.gan)).abs() < 1e-12);
    for ((a, b), c) in g0.flat().iter().zip(g1.flat()).zip(g2.flat()) {
        assert!(((c - a) - 2.0 * (b - a)).abs() < 1e-12);
    }
}

#[test]
fn default_schedule_reaches_equilibrium_band() {
    let mut rng = seeded(0);
    let data = standardized_mixture(6400, 0);
    let cfg = TrainConfig {
        reweight_epochs: 0,
        baseline_epochs: 20,
        epochs: 20,
        ..TrainConfig::default()
    };
    let mut m = CGanModel::new(ArchConfig::default(), 2, 2, &cfg, &mut rng).unwrap();
    let rec = train_schedule(&mut m, &data, &[], &cfg, false, None, &mut rng).unwrap();
    assert_eq!(rec.metrics.len(), 2000);
    let tail = &rec.metrics[1900..];
    let real = tail.iter().map(|m| m.1.mean_dg_real).sum::<f64>() / 100.0;
    let fake = tail.iter().map(|m| m.1.mean_dg_fake).sum::<f64>() / 100.0;
    assert!(
        (0.3..=0.7).contains(&real) && (0.3..=0.7).contains(&fake),
        "{real} {fake}"
    );
}

#[test]
fn checkpoint_round_trip_is_forward_identical() {
    for seed in 0..3 {
        assert!(common::infra::checkpoint_round_trip(seed));
    }
}
