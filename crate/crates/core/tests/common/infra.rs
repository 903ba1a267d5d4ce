//! Round trips through files: IDX, model checkpoints, and a full replay of
//! a training run from its manifest.

use std::path::Path;

use gold_core::cgan::{read_cgan, write_cgan, ArchConfig, CGanModel, RealBatch, TrainConfig};
use gold_core::config::ExperimentConfig;
use gold_core::data::{load_idx, seeded, write_idx, IdxImages, Sample, Standardizer};
use gold_core::nn::Tensor;
use gold_core::runner::{cmd_train, RunManifest};
use rand::Rng;

/// Random images survive write then load exactly.
pub fn idx_round_trip(dir: &Path, seed: u64) -> bool {
    let mut rng = seeded(seed);
    let (rows, cols, n) = (3, 4, 17);
    let pixels: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..rows * cols).map(|_| rng.random()).collect())
        .collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let images = IdxImages {
        rows,
        cols,
        pixels: pixels.clone(),
    };
    let (ip, lp) = (
        dir.join(format!("img{seed}.idx")),
        dir.join(format!("lbl{seed}.idx")),
    );
    write_idx(&ip, &lp, &images, &labels).unwrap();
    let loaded = load_idx(&ip, &lp).unwrap();
    let expected: Vec<Sample> = pixels
        .iter()
        .zip(&labels)
        .map(|(p, &c)| {
            Sample::new(
                p.iter().map(|&v| f64::from(v) / 255.0).collect(),
                c as usize,
            )
        })
        .collect();
    loaded == expected
}

/// A trained model written and read back gives bit-identical generator
/// and discriminator outputs.
pub fn checkpoint_round_trip(seed: u64) -> bool {
    let mut rng = seeded(seed);
    let cfg = TrainConfig::default();
    let arch = ArchConfig {
        zero_init_heads: false,
        ..ArchConfig::default()
    };
    let mut model = CGanModel::new(arch, 2, 2, &cfg, &mut rng).unwrap();
    let data: Vec<Sample> = (0..64)
        .map(|i| Sample::new(vec![rng.random(), rng.random()], i % 2))
        .collect();
    for _ in 0..5 {
        model
            .train_step(
                RealBatch {
                    labeled: &data,
                    unlabeled: &[],
                },
                &cfg,
                &mut rng,
            )
            .unwrap();
    }
    let st = Standardizer {
        mean: vec![0.5, -1.25],
        std: vec![2.0, 0.1],
    };
    let mut buf = Vec::new();
    write_cgan(&mut buf, &model, "abc123", &st).unwrap();
    let (back, header) = read_cgan(buf.as_slice(), cfg.adam_g).unwrap();
    let z = Tensor::from_vec(
        6,
        model.latent_dim(),
        (0..6 * model.latent_dim()).map(|_| rng.random()).collect(),
    )
    .unwrap();
    let classes = [0, 1, 1, 0, 1, 0];
    let x = model.generate(&z, &classes).unwrap();
    let same_gen = x.data() == back.generate(&z, &classes).unwrap().data();
    let (a, b) = (
        model.discriminate(&x).unwrap(),
        back.discriminate(&x).unwrap(),
    );
    same_gen
        && a.d_g == b.d_g
        && a.d_c.data() == b.d_c.data()
        && header.config_hash == "abc123"
        && header.standardizer == st
        && (header.latent_dim, header.class_count, header.data_dim) == (model.latent_dim(), 2, 2)
}

/// Short training config used by replay checks.
pub fn small_train_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.train_size = 640;
    cfg.data.test_size = 200;
    cfg.train.train.epochs = 4;
    cfg.train.train.baseline_epochs = 2;
    cfg.train.train.reweight_epochs = 2;
    cfg.train.trend_interval = 5;
    cfg.train.probe_size = 100;
    cfg
}

/// Train, then replay from the written manifest into a second directory;
/// returns the artifacts that differ.
pub fn manifest_replay(dir: &Path, cfg: &ExperimentConfig) -> Vec<String> {
    let first = dir.join("first");
    let second = dir.join("second");
    let m1 = cmd_train(cfg, &first).unwrap();
    let loaded = RunManifest::load(&first.join(gold_core::runner::MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, m1);
    let m2 = cmd_train(&loaded.config, &second).unwrap();
    m2.differences(&m1)
}
