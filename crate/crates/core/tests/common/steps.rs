//! Baseline vs re-weighted steps with a vanishing exponent.

use gold_core::cgan::{ArchConfig, CGanModel, LatentBatch, LossTerms, RealBatch, TrainConfig};
use gold_core::data::{seeded, standard_normal, Sample};
use gold_core::nn::Tensor;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// With `β_d = β_g = 0` the re-weighted step must match the baseline step
/// bit for bit: both gradients on a fixed batch, and the parameters after
/// a full step from identical states.
pub fn beta_zero_matches_baseline(seed: u64) -> bool {
    let mut rng = seeded(seed);
    let cfg = TrainConfig {
        beta_d: 0.0,
        beta_g: 0.0,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let arch = ArchConfig {
        zero_init_heads: false,
        ..ArchConfig::default()
    };
    let model = CGanModel::new(arch, 2, 2, &cfg, &mut rng).unwrap();
    let labeled: Vec<Sample> = (0..16)
        .map(|i| {
            Sample::new(
                vec![standard_normal(&mut rng), standard_normal(&mut rng)],
                i % 2,
            )
        })
        .collect();
    let real = RealBatch {
        labeled: &labeled,
        unlabeled: &[],
    };
    let latent = LatentBatch::sample(16, model.latent_dim(), 2, &mut rng);
    let fake: Tensor = model.generate(&latent.z, &latent.classes).unwrap();
    let out = model.discriminate(&fake).unwrap();
    let scores = model.generated_gold(&out, &latent.classes);
    let wd: Vec<f64> = scores.iter().map(|&d| cfg.weight_d().weight(d)).collect();
    let wg: Vec<f64> = scores.iter().map(|&d| cfg.weight_g().weight(d)).collect();

    let (_, d_base) = model
        .discriminator_loss_grad(
            real,
            &fake,
            &latent.classes,
            cfg.lambda_c,
            None,
            LossTerms::ALL,
        )
        .unwrap();
    let (_, d_rw) = model
        .discriminator_loss_grad(
            real,
            &fake,
            &latent.classes,
            cfg.lambda_c,
            Some(&wd),
            LossTerms::ALL,
        )
        .unwrap();
    let (_, g_base, _) = model
        .generator_loss_grad(&latent, cfg.lambda_c, None)
        .unwrap();
    let (_, g_rw, _) = model
        .generator_loss_grad(&latent, cfg.lambda_c, Some(&wg))
        .unwrap();
    let grads_equal =
        bits(&d_base.flat()) == bits(&d_rw.flat()) && bits(&g_base.flat()) == bits(&g_rw.flat());

    let (mut a, mut b) = (model.clone(), model);
    let ma = a.train_step(real, &cfg, &mut seeded(seed + 1)).unwrap();
    let mb = b
        .reweighted_train_step(real, &cfg, &mut seeded(seed + 1))
        .unwrap();
    grads_equal
        && ma == mb
        && bits(&a.generator.params_flat()) == bits(&b.generator.params_flat())
        && bits(&a.discriminator.params_flat()) == bits(&b.discriminator.params_flat())
}
