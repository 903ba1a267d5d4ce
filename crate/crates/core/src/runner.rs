//! Experiment commands behind the CLI: each takes a validated
//! configuration, writes artifacts under one output directory and returns
//! the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apps::{
    active_learning_run, balanced_targets, rejection_sample, sign_test, train_schedule,
    Acquisition, ActiveSetup, ActiveState, PoolScores, TrendOptions,
};
use crate::cgan::{read_cgan, write_cgan, CGanModel};
use crate::config::{hex, DatasetKind, ExperimentConfig};
use crate::data::{
    derive_seed, load_idx, make_pool, seeded, write_samples_csv, Sample, SamplePool, Standardizer,
};
use crate::eval::{
    export_histogram, fitting_capacity, score_generated, FittingCapacityReport, FixedSource,
    GeneratorSource,
};
use crate::gold::Provenance;
use crate::plot::{render, PlotKind, GROUP_GENERATED, GROUP_LABELED, GROUP_POOL};
use crate::table::Table;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

// seed streams derived from the configured seeds
const STREAM_DATA: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_HISTOGRAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
    /// Wall-clock seconds per phase.
    pub durations: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Artifacts whose content differs from `other`'s, by path. The config
    /// copy is compared through the hash since it records the output
    /// directory.
    pub fn differences(&self, other: &RunManifest) -> Vec<String> {
        let theirs: BTreeMap<&str, &str> = other
            .artifacts
            .iter()
            .map(|a| (a.path.as_str(), a.sha256.as_str()))
            .collect();
        let mut diffs: Vec<String> = self
            .artifacts
            .iter()
            .filter(|a| {
                a.path != CONFIG_FILE && theirs.get(a.path.as_str()) != Some(&a.sha256.as_str())
            })
            .map(|a| a.path.clone())
            .collect();
        for a in &other.artifacts {
            if !self.artifacts.iter().any(|b| b.path == a.path) {
                diffs.push(a.path.clone());
            }
        }
        if self.config_hash != other.config_hash {
            diffs.push("config_hash".into());
        }
        diffs
    }
}

/// Collects artifacts and timings while a command runs.
struct Run {
    out: PathBuf,
    cfg: ExperimentConfig,
    command: String,
    seeds: Vec<u64>,
    artifacts: Vec<Artifact>,
    durations: BTreeMap<String, f64>,
}

impl Run {
    fn start(command: &str, cfg: &ExperimentConfig, out: &Path) -> Result<Self> {
        cfg.validate()?;
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let mut run = Run {
            out: out.to_path_buf(),
            cfg: cfg.clone(),
            command: command.to_string(),
            seeds: Vec::new(),
            artifacts: Vec::new(),
            durations: BTreeMap::new(),
        };
        run.write(CONFIG_FILE, cfg.to_toml().as_bytes())?;
        Ok(run)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        self.write(name, text.as_bytes())
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f(self)?;
        self.durations
            .insert(phase.to_string(), t.elapsed().as_secs_f64());
        Ok(r)
    }

    fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            config_hash: self.cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: self.seeds,
            artifacts: self.artifacts,
            durations: self.durations,
            config: self.cfg,
        };
        let path = self.out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("serializable");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Standardized training data and raw test data.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub labeled: Vec<Sample>,
    pub unlabeled: Vec<Vec<f64>>,
    /// Standardized with the training statistics.
    pub test: Vec<Sample>,
    pub standardizer: Standardizer,
}

fn raw_dataset(
    cfg: &ExperimentConfig,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let d = &cfg.data;
    let mut rng = seeded(seed);
    match d.kind {
        DatasetKind::Synthetic => {
            let m = d.mixture()?;
            let train = m.sample(n_train, &mut rng);
            let test = m.sample(n_test, &mut rng);
            Ok((train, test))
        }
        DatasetKind::Idx => {
            use rand::seq::SliceRandom;
            let path = |p: &Option<PathBuf>| p.clone().expect("validated");
            let mut train = load_idx(path(&d.train_images), path(&d.train_labels))?;
            let mut test = load_idx(path(&d.test_images), path(&d.test_labels))?;
            if let Some(s) = train.iter().chain(&test).find(|s| s.class >= d.class_count) {
                return Err(Error::Config(format!(
                    "label {} outside data.class_count = {}",
                    s.class, d.class_count
                )));
            }
            train.shuffle(&mut rng);
            test.shuffle(&mut rng);
            if train.len() < n_train || test.len() < n_test {
                return Err(Error::Config(format!(
                    "requested {n_train} train / {n_test} test samples, files hold {} / {}",
                    train.len(),
                    test.len()
                )));
            }
            train.truncate(n_train);
            test.truncate(n_test);
            Ok((train, test))
        }
    }
}

/// Training data for `train`: a labeled fraction, the rest unlabeled,
/// standardized on the training statistics.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Prepared> {
    let d = &cfg.data;
    let (train, test) = raw_dataset(
        cfg,
        d.train_size,
        d.test_size,
        derive_seed(d.seed, STREAM_DATA),
    )?;
    let st = Standardizer::fit(train.iter().map(|s| s.x.as_slice()))?;
    let n_lab = ((d.labeled_fraction * train.len() as f64).round() as usize).clamp(1, train.len());
    let train = st.transform_samples(&train);
    Ok(Prepared {
        labeled: train[..n_lab].to_vec(),
        unlabeled: if n_lab < train.len() {
            train[n_lab..].iter().map(|s| s.x.clone()).collect()
        } else {
            Vec::new()
        },
        test: st.transform_samples(&test),
        standardizer: st,
    })
}

fn write_checkpoint(run: &mut Run, model: &CGanModel, st: &Standardizer) -> Result<()> {
    let mut buf = Vec::new();
    write_cgan(&mut buf, model, &run.cfg.hash(), st).map_err(|e| Error::io(CHECKPOINT_FILE, e))?;
    run.write(CHECKPOINT_FILE, &buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<(CGanModel, Standardizer)> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (model, header) = read_cgan(std::io::BufReader::new(f), cfg.train.train.adam_g)?;
    Ok((model, header.standardizer))
}

const METRIC_COLUMNS: [&str; 9] = [
    "step",
    "phase",
    "d_loss",
    "g_loss",
    "ac_loss",
    "mean_dg_real",
    "mean_dg_fake",
    "mean_gold_fake",
    "epoch",
];

/// Baseline then (optionally) re-weighted training. Writes the checkpoint,
/// per-step metrics, the GOLD trend log and a score histogram.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let mut run = Run::start("train", cfg, out)?;
    let data = run.timed("data", |_| prepare_data(cfg))?;
    let tc = &cfg.train.train;
    run.seeds = vec![tc.seed, cfg.data.seed];
    let mut rng = seeded(tc.seed);
    let mut model = CGanModel::new(
        cfg.model.clone(),
        data.standardizer.dim(),
        cfg.data.class_count,
        tc,
        &mut rng,
    )?;
    let trend = (cfg.train.trend_interval > 0).then_some(TrendOptions {
        interval: cfg.train.trend_interval,
        probe_size: cfg.train.probe_size,
    });
    let record = run.timed("train", |_| {
        train_schedule(
            &mut model,
            &data.labeled,
            &data.unlabeled,
            tc,
            cfg.train.reweight,
            trend,
            &mut rng,
        )
    })?;
    let hash = cfg.hash();
    let steps_per_epoch = (record.metrics.len() / tc.epochs.max(1)).max(1);
    let mut metrics = Table::new(&METRIC_COLUMNS);
    metrics.config_hash = Some(hash.clone());
    for (i, (phase, m)) in record.metrics.iter().enumerate() {
        metrics.push(vec![
            (i + 1) as f64,
            f64::from(u8::from(*phase == crate::apps::Phase::Reweight)),
            m.d_loss,
            m.g_loss,
            m.ac_loss,
            m.mean_dg_real,
            m.mean_dg_fake,
            m.mean_gold_fake,
            (i / steps_per_epoch) as f64,
        ]);
    }
    run.write("metrics.csv", metrics.to_csv().as_bytes())?;
    run.write(
        "trend.csv",
        record.trend.to_table(Some(&hash)).to_csv().as_bytes(),
    )?;
    let mut hrng = seeded(derive_seed(tc.seed, STREAM_HISTOGRAM));
    let classes = (0..cfg.train.probe_size.max(2))
        .map(|i| i % model.class_count)
        .collect();
    let scores = score_generated(&model, classes, &mut hrng)?;
    let hist = export_histogram(&scores, 30)?;
    run.write(
        "histogram.csv",
        hist.to_table(Some(&hash)).to_csv().as_bytes(),
    )?;
    write_checkpoint(&mut run, &model, &data.standardizer)?;
    run.finish()
}

/// Options of `sample`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    pub checkpoint: PathBuf,
    pub reject: bool,
    /// Defaults to `rejection.target_accept_count`.
    pub count: Option<usize>,
    pub seed: u64,
    pub scatter: bool,
}

fn samples_csv(samples: &[Sample], st: &Standardizer) -> Vec<u8> {
    let raw: Vec<Sample> = samples
        .iter()
        .map(|s| Sample::new(st.inverse(&s.x), s.class))
        .collect();
    let mut buf = Vec::new();
    write_samples_csv(&mut buf, &raw).expect("write to Vec");
    buf
}

fn scatter_svg(samples: &[Sample], st: &Standardizer) -> Result<String> {
    let mut t = Table::new(&["x1", "x2", "class", "group"]);
    for s in samples {
        let x = st.inverse(&s.x);
        if x.len() < 2 {
            return Err(Error::Config(
                "scatter plots need at least 2 features".into(),
            ));
        }
        t.push(vec![x[0], x[1], s.class as f64, GROUP_GENERATED]);
    }
    Ok(render(PlotKind::Scatter, &[("samples".into(), t)])?.svg)
}

fn p_label(p: f64) -> String {
    format!("{p:.2}").replace('.', "_")
}

/// Plain or GOLD-rejection sampling from a checkpoint; samples are written
/// in the original feature space. Acceptance probabilities are relative to
/// each candidate batch: `M` and the shift `γ` are recomputed per batch.
pub fn cmd_sample(cfg: &ExperimentConfig, opts: &SampleOptions, out: &Path) -> Result<RunManifest> {
    let mut run = Run::start("sample", cfg, out)?;
    let (model, st) = load_checkpoint(&opts.checkpoint, cfg)?;
    let count = opts
        .count
        .unwrap_or(cfg.rejection.rejection.target_accept_count);
    let targets = balanced_targets(count, model.class_count);
    run.seeds = vec![opts.seed];
    let mut rng = seeded(derive_seed(opts.seed, STREAM_SAMPLE));
    let mut summary = BTreeMap::new();
    summary.insert(
        "scale_factor".to_string(),
        serde_json::json!(count as f64 / cfg.rejection.reference_sample_count as f64),
    );
    if opts.reject {
        let ps = if cfg.rejection.p_sweep.is_empty() {
            vec![cfg.rejection.rejection.p]
        } else {
            cfg.rejection.p_sweep.clone()
        };
        for p in ps {
            let rc = crate::apps::RejectionConfig {
                p,
                target_accept_count: count,
                ..cfg.rejection.rejection.clone()
            };
            let outcome = run.timed(&format!("reject_p{}", p_label(p)), |_| {
                rejection_sample(&model, &targets, &rc, &mut rng)
            })?;
            let name = format!("samples_p{}.csv", p_label(p));
            run.write(&name, &samples_csv(&outcome.accepted, &st))?;
            if opts.scatter {
                let svg = scatter_svg(&outcome.accepted, &st)?;
                run.write(&format!("samples_p{}.svg", p_label(p)), svg.as_bytes())?;
            }
            summary.insert(
                format!("p{}", p_label(p)),
                serde_json::json!({
                    "p": p,
                    "accepted": outcome.accepted.len(),
                    "candidates": outcome.candidates,
                    "batches": outcome.batches,
                    "mean_candidate_score": outcome.mean_candidate_score,
                    "mean_accepted_score": outcome.mean_accepted_score,
                    "raw_fallback_batches": outcome.raw_fallback_batches,
                }),
            );
        }
    } else {
        let mut classes: Vec<usize> = Vec::with_capacity(count);
        for (c, &n) in targets.iter().enumerate() {
            classes.extend(std::iter::repeat_n(c, n));
        }
        let samples = model.generate_samples(classes, &mut rng)?;
        run.write("samples.csv", &samples_csv(&samples, &st))?;
        if opts.scatter {
            let svg = scatter_svg(&samples, &st)?;
            run.write("samples.svg", svg.as_bytes())?;
        }
    }
    run.write_json("sample_summary.json", &summary)?;
    run.finish()
}

/// Options of `eval`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    /// Evaluate a fixed sample file (e.g. rejection output) instead of
    /// fresh generator draws.
    pub samples: Option<PathBuf>,
}

/// Fitting capacity of a checkpoint (or of a fixed generated sample set)
/// on the configured test set.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    opts: &EvalOptions,
    out: &Path,
) -> Result<(RunManifest, FittingCapacityReport)> {
    let mut run = Run::start("eval", cfg, out)?;
    let (model, st) = load_checkpoint(&opts.checkpoint, cfg)?;
    let d = &cfg.data;
    let (_, test_raw) = raw_dataset(
        cfg,
        d.train_size,
        d.test_size,
        derive_seed(d.seed, STREAM_DATA),
    )?;
    let dim = test_raw.first().map_or(0, |s| s.x.len());
    if dim != model.data_dim || st.dim() != model.data_dim {
        return Err(Error::Config(format!(
            "checkpoint expects {} features, dataset has {dim}",
            model.data_dim
        )));
    }
    if model.class_count != d.class_count {
        return Err(Error::Config(format!(
            "checkpoint has {} classes, data.class_count is {}",
            model.class_count, d.class_count
        )));
    }
    let test = st.transform_samples(&test_raw);
    run.seeds = vec![cfg.eval.seed];
    let mut rng = seeded(cfg.eval.seed);
    let mut report = run.timed("eval", |_| match &opts.samples {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let samples = st.transform_samples(&crate::data::read_samples_csv(&text)?);
            let mut src = FixedSource::new(samples, Provenance::Generated)?;
            fitting_capacity(&mut src, &test, model.class_count, &cfg.eval, &mut rng)
        }
        None => fitting_capacity(
            &mut GeneratorSource { model: &model },
            &test,
            model.class_count,
            &cfg.eval,
            &mut rng,
        ),
    })?;
    report.config_hash = Some(cfg.hash());
    run.write_json("fitting_capacity.json", &report)?;
    let mut curve = Table::new(&["epoch", "accuracy"]);
    curve.config_hash = report.config_hash.clone();
    for (i, a) in report.curve.iter().enumerate() {
        curve.push(vec![(i + 1) as f64, *a]);
    }
    run.write("capacity_curve.csv", curve.to_csv().as_bytes())?;
    Ok((run.finish()?, report))
}

/// Per-trial pool, validation set and trial seed.
pub fn active_trial_data(
    cfg: &ExperimentConfig,
    trial_seed: u64,
) -> Result<(SamplePool, Vec<Sample>)> {
    let a = &cfg.active;
    let (train, test) = raw_dataset(
        cfg,
        a.pool_size + a.validation_size,
        a.test_size,
        derive_seed(trial_seed, STREAM_DATA),
    )?;
    let validation_raw = train[a.pool_size..].to_vec();
    let mut data = test;
    data.extend_from_slice(&train[..a.pool_size]);
    let mut rng = seeded(derive_seed(trial_seed, STREAM_SAMPLE));
    let mut pool = make_pool(
        &data,
        a.initial_n,
        a.test_size,
        cfg.data.class_count,
        &mut rng,
    )?;
    let st = Standardizer::fit(pool.train_features())?;
    pool.map_features(|x| st.transform(x));
    Ok((pool, st.transform_samples(&validation_raw)))
}

pub fn trial_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    let base = cfg.run.seeds[0];
    (0..cfg.active.trials)
        .map(|i| {
            cfg.run
                .seeds
                .get(i)
                .copied()
                .unwrap_or_else(|| derive_seed(base, i as u64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSummary {
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub gold_final: Vec<f64>,
    pub random_final: Vec<f64>,
    pub gold_mean: f64,
    pub random_mean: f64,
    pub sign_test: crate::apps::SignTest,
}

fn round_scatter(
    model: &CGanModel,
    pool: &SamplePool,
    scores: Option<&PoolScores>,
    seed: u64,
) -> Result<String> {
    let mut t = Table::new(&["x1", "x2", "class", "group", "score"]);
    let by_id: BTreeMap<_, _> =
        scores.map_or_else(BTreeMap::new, |s| s.ids.iter().zip(&s.scores).collect());
    for s in pool.unlabeled() {
        let score = by_id.get(&s.id).map_or(0.0, |g| g.combined);
        t.push(vec![s.x[0], s.x[1], 0.0, GROUP_POOL, score]);
    }
    let mut rng = seeded(seed);
    let n = 200;
    for g in model.generate_samples((0..n).map(|i| i % model.class_count).collect(), &mut rng)? {
        t.push(vec![g.x[0], g.x[1], g.class as f64, GROUP_GENERATED, 0.0]);
    }
    for s in pool.labeled() {
        t.push(vec![s.x[0], s.x[1], s.class as f64, GROUP_LABELED, 0.0]);
    }
    Ok(render(PlotKind::Scatter, &[("round".into(), t)])?.svg)
}

/// One trial, both arms; scatter SVGs for every round when `plots`.
fn run_trial(
    cfg: &ExperimentConfig,
    seed: u64,
    plots: bool,
) -> Result<(ActiveState, ActiveState, Vec<(String, String)>)> {
    let (pool, validation) = active_trial_data(cfg, seed)?;
    let setup = ActiveSetup {
        arch: &cfg.model,
        train: &cfg.train.train,
        active: &cfg.active,
        eval: &cfg.eval,
        validation: &validation,
    };
    let mut svgs = Vec::new();
    let mut arms = Vec::new();
    for acq in [Acquisition::Gold, Acquisition::Random] {
        let mut observer = |round: usize,
                            model: &CGanModel,
                            pool: &SamplePool,
                            scores: Option<&PoolScores>|
         -> Result<()> {
            if plots && model.data_dim >= 2 {
                svgs.push((
                    format!("scatter_{}_round{round}.svg", acq.as_str()),
                    round_scatter(model, pool, scores, seed)?,
                ));
            }
            Ok(())
        };
        let (state, _, _) =
            active_learning_run(pool.clone(), &setup, acq, seed, Some(&mut observer))?;
        arms.push(state);
    }
    let random = arms.pop().expect("two arms");
    let gold = arms.pop().expect("two arms");
    Ok((gold, random, svgs))
}

/// Paired GOLD vs random acquisition over all trials. Trials run in
/// parallel; outputs do not depend on scheduling.
pub fn cmd_active(cfg: &ExperimentConfig, out: &Path) -> Result<(RunManifest, ActiveSummary)> {
    let mut run = Run::start("active", cfg, out)?;
    let seeds = trial_seeds(cfg);
    run.seeds = seeds.clone();
    let results = run.timed("trials", |_| {
        let indexed: Vec<(usize, u64)> = seeds.iter().copied().enumerate().collect();
        crate::par::map(&indexed, |&(i, s)| run_trial(cfg, s, i == 0))
            .into_iter()
            .collect::<Result<Vec<_>>>()
    })?;
    let hash = cfg.hash();
    let rounds = cfg.active.rounds();
    let mut curve = Table::new(&["round", "labeled_size", "gold", "random"]);
    curve.config_hash = Some(hash.clone());
    for r in 0..=rounds {
        let mean =
            |pick: &dyn Fn(&(ActiveState, ActiveState, Vec<(String, String)>)) -> &ActiveState| {
                results
                    .iter()
                    .map(|t| pick(t).history[r].fitting_capacity)
                    .sum::<f64>()
                    / results.len() as f64
            };
        curve.push(vec![
            r as f64,
            results[0].0.history[r].labeled_size as f64,
            mean(&|t| &t.0),
            mean(&|t| &t.1),
        ]);
    }
    run.write("capacity_curve.csv", curve.to_csv().as_bytes())?;
    let mut pairs = Vec::new();
    for (i, (gold, random, svgs)) in results.iter().enumerate() {
        run.write_json(&format!("trial{i:03}_gold.json"), gold)?;
        run.write_json(&format!("trial{i:03}_random.json"), random)?;
        for (name, svg) in svgs {
            run.write(&format!("trial{i:03}_{name}"), svg.as_bytes())?;
        }
        let last = |s: &ActiveState| s.history.last().map_or(f64::NAN, |h| h.fitting_capacity);
        pairs.push((last(gold), last(random)));
    }
    let n = pairs.len() as f64;
    let summary = ActiveSummary {
        trials: pairs.len(),
        seeds,
        gold_final: pairs.iter().map(|p| p.0).collect(),
        random_final: pairs.iter().map(|p| p.1).collect(),
        gold_mean: pairs.iter().map(|p| p.0).sum::<f64>() / n,
        random_mean: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        sign_test: sign_test(&pairs),
    };
    run.write_json("active_summary.json", &summary)?;
    Ok((run.finish()?, summary))
}

/// Render CSV inputs as one SVG at `out`.
pub fn cmd_plot(kind: PlotKind, inputs: &[PathBuf], out: &Path) -> Result<Vec<String>> {
    let mut tables = Vec::new();
    for p in inputs {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let t = Table::parse(&text).map_err(|e| match e {
            Error::Schema { line, message } => Error::Schema {
                line,
                message: format!("{}: {message}", p.display()),
            },
            other => other,
        })?;
        let name = p.file_stem().map_or_else(
            || p.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        tables.push((name, t));
    }
    let r = render(kind, &tables)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let f = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    use std::io::Write;
    let mut w = BufWriter::new(f);
    w.write_all(r.svg.as_bytes())
        .map_err(|e| Error::io(out, e))?;
    Ok(r.warnings)
}
