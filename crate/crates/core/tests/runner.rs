mod common;

use std::fs;
use std::path::Path;

use common::infra::{manifest_replay, small_train_config};
use gold_core::config::ExperimentConfig;
use gold_core::data::read_samples_csv;
use gold_core::eval::TrendLog;
use gold_core::plot::PlotKind;
use gold_core::runner::{
    cmd_active, cmd_eval, cmd_plot, cmd_sample, cmd_train, EvalOptions, SampleOptions,
    CHECKPOINT_FILE, CONFIG_FILE, MANIFEST_FILE,
};
use gold_core::Error;

fn fast(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.eval.epochs = 3;
    cfg.eval.samples_per_epoch = 500;
    cfg
}

fn train_into(dir: &Path) -> ExperimentConfig {
    let cfg = fast(small_train_config());
    cmd_train(&cfg, dir).unwrap();
    cfg
}

fn sample_opts(dir: &Path, reject: bool, count: usize) -> SampleOptions {
    SampleOptions {
        checkpoint: dir.join(CHECKPOINT_FILE),
        reject,
        count: Some(count),
        seed: 3,
        scatter: true,
    }
}

#[test]
fn train_lists_every_artifact_in_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fast(small_train_config());
    let m = cmd_train(&cfg, dir.path()).unwrap();
    let names: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    for f in [
        CONFIG_FILE,
        "metrics.csv",
        "trend.csv",
        "histogram.csv",
        CHECKPOINT_FILE,
    ] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
        assert!(dir.path().join(f).exists());
    }
    assert!(dir.path().join(MANIFEST_FILE).exists());
    assert_eq!(m.config_hash, cfg.hash());
    let trend =
        TrendLog::parse_csv(&fs::read_to_string(dir.path().join("trend.csv")).unwrap()).unwrap();
    let steps = fs::read_to_string(dir.path().join("metrics.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        - 1;
    assert_eq!(trend.len(), steps / cfg.train.trend_interval);
}

#[test]
fn disabling_reweighting_logs_only_baseline_steps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast(small_train_config());
    cfg.train.reweight = false;
    cfg.train.trend_interval = 0;
    cmd_train(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let t = gold_core::table::Table::parse(&text).unwrap();
    let phase = t.column("phase").unwrap();
    assert!(t.rows.iter().all(|r| r[phase] == 0.0));
    let trend =
        TrendLog::parse_csv(&fs::read_to_string(dir.path().join("trend.csv")).unwrap()).unwrap();
    assert!(trend.is_empty());
}

#[test]
fn sampling_writes_requested_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = train_into(dir.path());
    let plain = dir.path().join("plain");
    cmd_sample(&cfg, &sample_opts(dir.path(), false, 60), &plain).unwrap();
    let s = read_samples_csv(&fs::read_to_string(plain.join("samples.csv")).unwrap()).unwrap();
    assert_eq!(s.len(), 60);
    assert!(plain.join("samples.svg").exists());

    let mut sweep = cfg.clone();
    sweep.rejection.p_sweep = vec![0.0, 0.5, 0.9];
    let rej = dir.path().join("reject");
    let m = cmd_sample(&sweep, &sample_opts(dir.path(), true, 30), &rej).unwrap();
    for label in ["0_00", "0_50", "0_90"] {
        let text = fs::read_to_string(rej.join(format!("samples_p{label}.csv"))).unwrap();
        assert_eq!(read_samples_csv(&text).unwrap().len(), 30);
    }
    let csvs = m
        .artifacts
        .iter()
        .filter(|a| a.path.starts_with("samples_p") && a.path.ends_with(".csv"))
        .count();
    assert_eq!(csvs, 3);
}

#[test]
fn eval_is_reproducible_and_accepts_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = train_into(dir.path());
    let opts = EvalOptions {
        checkpoint: dir.path().join(CHECKPOINT_FILE),
        samples: None,
    };
    let (_, a) = cmd_eval(&cfg, &opts, &dir.path().join("e1")).unwrap();
    let (_, b) = cmd_eval(&cfg, &opts, &dir.path().join("e2")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(dir.path().join("e1/fitting_capacity.json")).unwrap(),
        fs::read(dir.path().join("e2/fitting_capacity.json")).unwrap()
    );
    assert_eq!(a.config_hash.as_deref(), Some(cfg.hash().as_str()));

    let samples = dir.path().join("s");
    cmd_sample(&cfg, &sample_opts(dir.path(), false, 120), &samples).unwrap();
    let opts = EvalOptions {
        samples: Some(samples.join("samples.csv")),
        ..opts
    };
    let (_, c) = cmd_eval(&cfg, &opts, &dir.path().join("e3")).unwrap();
    assert!((0.0..=1.0).contains(&c.accuracy));
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = train_into(dir.path());
    let mut other = cfg.clone();
    other.data.class_count = 3;
    other.data.circle_components = 3;
    let opts = EvalOptions {
        checkpoint: dir.path().join(CHECKPOINT_FILE),
        samples: None,
    };
    assert!(cmd_eval(&other, &opts, &dir.path().join("e")).is_err());
}

#[test]
fn replaying_a_manifest_reproduces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let diffs = manifest_replay(dir.path(), &fast(small_train_config()));
    assert!(diffs.is_empty(), "{diffs:?}");
}

#[test]
fn changing_the_config_changes_the_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fast(small_train_config());
    let a = cmd_train(&cfg, &dir.path().join("a")).unwrap();
    let mut other = cfg.clone();
    other.train.train.seed += 1;
    let b = cmd_train(&other, &dir.path().join("b")).unwrap();
    let diffs = a.differences(&b);
    assert!(diffs.contains(&"config_hash".to_string()));
    assert!(diffs.contains(&CHECKPOINT_FILE.to_string()));
}

#[test]
fn plots_are_deterministic_and_check_columns() {
    let dir = tempfile::tempdir().unwrap();
    train_into(dir.path());
    let trend = dir.path().join("trend.csv");
    let a = dir.path().join("a.svg");
    let b = dir.path().join("b.svg");
    cmd_plot(PlotKind::Trend, &[trend.clone()], &a).unwrap();
    cmd_plot(PlotKind::Trend, &[trend], &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    cmd_plot(
        PlotKind::Histogram,
        &[dir.path().join("histogram.csv")],
        &dir.path().join("h.svg"),
    )
    .unwrap();
    let err = cmd_plot(
        PlotKind::Trend,
        &[dir.path().join("histogram.csv")],
        &dir.path().join("bad.svg"),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Schema { .. }), "{err}");
}

#[test]
fn small_active_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast(ExperimentConfig::default());
    cfg.active.epochs = 2;
    cfg.active.eval_interval = 1;
    cfg.active.pool_size = 60;
    cfg.active.test_size = 60;
    cfg.active.validation_size = 30;
    cfg.active.final_n = 6;
    cfg.active.trials = 2;
    let (m1, s1) = cmd_active(&cfg, &dir.path().join("a")).unwrap();
    let (m2, s2) = cmd_active(&cfg, &dir.path().join("b")).unwrap();
    assert_eq!(s1, s2);
    assert!(m1.differences(&m2).is_empty());
    assert_eq!(s1.trials, 2);
    let curve = fs::read_to_string(dir.path().join("a/capacity_curve.csv")).unwrap();
    let t = gold_core::table::Table::parse(&curve).unwrap();
    let sizes: Vec<f64> = t.rows.iter().map(|r| r[1]).collect();
    assert_eq!(sizes, vec![4.0, 5.0, 6.0]);
    assert!(dir
        .path()
        .join("a/trial000_scatter_gold_round0.svg")
        .exists());
    assert!(!dir
        .path()
        .join("a/trial001_scatter_gold_round0.svg")
        .exists());
}
