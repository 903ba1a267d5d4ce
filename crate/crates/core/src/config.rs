//! Experiment configuration: one TOML file with a section per module,
//! `section.field=value` overrides, validation and a content hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apps::{ActiveConfig, RejectionConfig};
use crate::cgan::{ArchConfig, TrainConfig};
use crate::data::{Component, SyntheticMixture};
use crate::eval::EvalConfig;
use crate::{Error, Result};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "GOLD_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DatasetKind,
    /// Explicit mixture components; empty means the circle layout below.
    pub components: Vec<Component>,
    pub circle_components: usize,
    pub circle_radius: f64,
    pub circle_variance: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Fraction of training samples that keep their label in `train`.
    pub labeled_fraction: f64,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub class_count: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kind: DatasetKind::Synthetic,
            components: Vec::new(),
            circle_components: 6,
            circle_radius: 4.0,
            circle_variance: 0.2,
            train_size: 6400,
            test_size: 1000,
            labeled_fraction: 1.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            class_count: 2,
            seed: 0,
        }
    }
}

impl DataConfig {
    pub fn mixture(&self) -> Result<SyntheticMixture> {
        if self.components.is_empty() {
            SyntheticMixture::circle(
                self.circle_components,
                self.circle_radius,
                self.circle_variance,
            )
        } else {
            SyntheticMixture::new(self.components.clone())
        }
    }

    fn validate(&self) -> Result<()> {
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::Config(
                "data.train_size and data.test_size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.labeled_fraction) || self.labeled_fraction == 0.0 {
            return Err(Error::Config(format!(
                "data.labeled_fraction must be in (0, 1], got {}",
                self.labeled_fraction
            )));
        }
        match self.kind {
            DatasetKind::Synthetic => {
                let m = self
                    .mixture()
                    .map_err(|e| Error::Config(format!("data.components: {e}")))?;
                if m.class_count() != self.class_count {
                    return Err(Error::Config(format!(
                        "data.class_count is {} but the mixture has {} classes",
                        self.class_count,
                        m.class_count()
                    )));
                }
            }
            DatasetKind::Idx => {
                for (name, p) in [
                    ("data.train_images", &self.train_images),
                    ("data.train_labels", &self.train_labels),
                    ("data.test_images", &self.test_images),
                    ("data.test_labels", &self.test_labels),
                ] {
                    if p.is_none() {
                        return Err(Error::Config(format!(
                            "{name} is required for idx datasets"
                        )));
                    }
                }
                if self.class_count < 2 {
                    return Err(Error::Config("data.class_count must be at least 2".into()));
                }
            }
        }
        Ok(())
    }
}

/// Settings for `train` beyond the optimizer schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub reweight: bool,
    pub trend_interval: usize,
    pub probe_size: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            train: TrainConfig::default(),
            reweight: true,
            trend_interval: 100,
            probe_size: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectionSection {
    #[serde(flatten)]
    pub rejection: RejectionConfig,
    /// Sample count of the full-scale protocol, for the logged scale factor.
    pub reference_sample_count: usize,
    /// When non-empty, `sample --reject` writes one file per value of `p`.
    pub p_sweep: Vec<f64>,
}

impl Default for RejectionSection {
    fn default() -> Self {
        RejectionSection {
            rejection: RejectionConfig::default(),
            reference_sample_count: 50_000,
            p_sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("runs/default"),
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ArchConfig,
    pub train: TrainSection,
    pub rejection: RejectionSection,
    pub active: ActiveConfig,
    pub eval: EvalConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Load (or start from defaults) and apply `section.field=value`
    /// overrides in order, then validate.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.model.latent_dim == 0 {
            return Err(Error::Config("model.latent_dim must be positive".into()));
        }
        if self.model.hidden_g.contains(&0) || self.model.hidden_d.contains(&0) {
            return Err(Error::Config("model hidden widths must be positive".into()));
        }
        self.train.train.validate()?;
        if self.train.probe_size < 2 {
            return Err(Error::Config("train.probe_size must be at least 2".into()));
        }
        self.rejection.rejection.validate()?;
        if let Some(p) = self
            .rejection
            .p_sweep
            .iter()
            .find(|p| !(0.0..1.0).contains(*p))
        {
            return Err(Error::Config(format!(
                "rejection.p_sweep value {p} outside [0, 1)"
            )));
        }
        self.active.validate()?;
        self.eval.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding the output
    /// directory so relocated reruns share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex(&Sha256::digest(&json))
    }

    /// `run.output_dir`, placed under `$GOLD_OUTPUT_ROOT` when that is set
    /// and the directory is relative.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output(
            &self.run.output_dir,
            std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from),
        )
    }
}

pub fn resolve_output(dir: &Path, root: Option<PathBuf>) -> PathBuf {
    match root {
        Some(r) if dir.is_relative() => r.join(dir),
        _ => dir.to_path_buf(),
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Set `section.field` (dots descend into tables) to `value`, read as a
/// TOML value, or as a string when it does not parse as one.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(format!(
            "override `{assignment}` is not of the form section.field=value"
        ))
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) || parts.len() < 2 {
        return Err(Error::Config(format!(
            "override key `{key}` must be section.field"
        )));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override key `{key}`: `{p}` is not a section"))
        })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn overrides_apply_in_order() {
        let cfg = ExperimentConfig::load_with_overrides(
            None,
            &[
                "train.lambda_c=0.5".into(),
                "train.lambda_c=0.25".into(),
                "run.output_dir=out/x".into(),
                "active.final_n=12".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.train.lambda_c, 0.25);
        assert_eq!(cfg.run.output_dir, PathBuf::from("out/x"));
        assert_eq!(cfg.active.rounds(), 8);
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err =
            ExperimentConfig::load_with_overrides(None, &["train.lambda_c=-1".into()]).unwrap_err();
        assert!(err.to_string().contains("train.lambda_c"), "{err}");
        let err =
            ExperimentConfig::load_with_overrides(None, &["rejection.p=1.0".into()]).unwrap_err();
        assert!(err.to_string().contains("rejection.p"), "{err}");
        let err =
            ExperimentConfig::load_with_overrides(None, &["train.epochs=10".into()]).unwrap_err();
        assert!(err.to_string().contains("baseline_epochs"), "{err}");
        let err =
            ExperimentConfig::load_with_overrides(None, &["train.nope=1".into()]).unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn output_root_only_moves_relative_paths() {
        let root = Some(PathBuf::from("/tmp/root"));
        assert_eq!(
            resolve_output(Path::new("a/b"), root.clone()),
            PathBuf::from("/tmp/root/a/b")
        );
        assert_eq!(
            resolve_output(Path::new("/abs"), root),
            PathBuf::from("/abs")
        );
        assert_eq!(resolve_output(Path::new("a"), None), PathBuf::from("a"));
    }
}
