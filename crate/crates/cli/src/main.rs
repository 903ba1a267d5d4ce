use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gold_core::config::{resolve_output, ExperimentConfig, OUTPUT_ROOT_ENV};
use gold_core::plot::PlotKind;
use gold_core::runner::{self, EvalOptions, RunManifest, SampleOptions};
use gold_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "gold",
    version,
    about = "GOLD estimator experiments for auxiliary-classifier conditional GANs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one field, e.g. `--set train.epochs=10`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.FIELD=VALUE")]
    overrides: Vec<String>,
    /// Output directory; relative paths go under $GOLD_OUTPUT_ROOT when set.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> gold_core::Result<(ExperimentConfig, PathBuf)> {
        let mut overrides = self.overrides.clone();
        if let Some(o) = &self.out {
            overrides.push(format!(
                "run.output_dir={}",
                toml_string(&o.display().to_string())
            ));
        }
        let cfg = ExperimentConfig::load_with_overrides(self.config.as_deref(), &overrides)?;
        let out = cfg.output_dir();
        Ok((cfg, out))
    }
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Baseline then re-weighted training; writes a checkpoint, metrics, trend log and score histogram.
    Train(ConfigArgs),
    /// Draw samples from a checkpoint, optionally filtered by GOLD rejection sampling.
    ///
    /// With --reject, the bound M and the shift γ are re-estimated on every
    /// candidate batch, so acceptance probabilities are relative to the batch.
    Sample {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Filter candidates with GOLD rejection sampling.
        #[arg(long)]
        reject: bool,
        /// Rejection quantile; repeat for a sweep with one output file per value.
        #[arg(long = "p")]
        p: Vec<f64>,
        /// Rows to write; defaults to rejection.target_accept_count.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write an SVG scatter of the samples.
        #[arg(long)]
        scatter: bool,
    },
    /// Paired GOLD vs random acquisition trials.
    Active(ConfigArgs),
    /// Fitting capacity of a checkpoint on the configured test set.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Train the classifier on this fixed sample CSV instead of fresh generator draws.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Render CSV artifacts as an SVG.
    Plot {
        #[arg(long, value_parser = parse_kind)]
        kind: PlotKind,
        /// Output SVG path; relative paths go under $GOLD_OUTPUT_ROOT when set.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Re-run a train or active manifest into a new directory and compare artifacts.
    Replay {
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<PlotKind, String> {
    PlotKind::parse(s).ok_or_else(|| {
        format!("unknown plot kind `{s}`: expected trend, histogram, capacity-curve or scatter")
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Schema { .. }) => 1,
        Some(Error::Starvation(_)) => 3,
        _ => 2,
    }
}

fn report(manifest: &RunManifest, out: &Path) {
    println!(
        "{}: {} artifacts in {} (config {})",
        manifest.command,
        manifest.artifacts.len(),
        out.display(),
        &manifest.config_hash[..12]
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let (cfg, out) = args.load()?;
            let m = runner::cmd_train(&cfg, &out)?;
            report(&m, &out);
        }
        Command::Sample {
            config,
            checkpoint,
            reject,
            p,
            count,
            seed,
            scatter,
        } => {
            let (mut cfg, out) = config.load()?;
            if !p.is_empty() {
                cfg.rejection.p_sweep = p;
                cfg.validate()?;
            }
            let opts = SampleOptions {
                checkpoint,
                reject,
                count,
                seed,
                scatter,
            };
            let m = runner::cmd_sample(&cfg, &opts, &out)?;
            report(&m, &out);
        }
        Command::Active(args) => {
            let (cfg, out) = args.load()?;
            let (m, summary) = runner::cmd_active(&cfg, &out)?;
            report(&m, &out);
            println!(
                "gold {:.4} vs random {:.4}; sign test {}-{} (ties {}), p = {:.4}",
                summary.gold_mean,
                summary.random_mean,
                summary.sign_test.wins,
                summary.sign_test.losses,
                summary.sign_test.ties,
                summary.sign_test.p_value
            );
        }
        Command::Eval {
            config,
            checkpoint,
            samples,
        } => {
            let (cfg, out) = config.load()?;
            let (m, r) = runner::cmd_eval(
                &cfg,
                &EvalOptions {
                    checkpoint,
                    samples,
                },
                &out,
            )?;
            report(&m, &out);
            println!("fitting capacity {:.4}", r.accuracy);
        }
        Command::Plot { kind, out, inputs } => {
            let out = resolve_output(&out, std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from));
            for w in runner::cmd_plot(kind, &inputs, &out)? {
                log::warn!("{w}");
            }
            println!("wrote {}", out.display());
        }
        Command::Replay { manifest, out } => {
            let original = RunManifest::load(&manifest)?;
            let out = resolve_output(&out, std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from));
            let replayed = match original.command.as_str() {
                "train" => runner::cmd_train(&original.config, &out)?,
                "active" => runner::cmd_active(&original.config, &out)?.0,
                other => {
                    return Err(Error::Config(format!(
                        "replay supports train and active manifests, not {other}"
                    ))
                    .into())
                }
            };
            let diffs = replayed.differences(&original);
            if !diffs.is_empty() {
                anyhow::bail!("replay differs in: {}", diffs.join(", "));
            }
            println!("replay identical: {} artifacts", replayed.artifacts.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
