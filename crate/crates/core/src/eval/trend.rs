use serde::{Deserialize, Serialize};

use crate::cgan::{CGanModel, LatentBatch};
use crate::gold::{gold, score_stats, GoldScore, Provenance};
use crate::table::Table;
use crate::{Error, Result};

pub const TREND_COLUMNS: [&str; 6] = [
    "step",
    "mean_gold",
    "mean_marginal",
    "mean_conditional",
    "sigma_g",
    "sigma_c",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendEntry {
    pub step: u64,
    pub mean_gold: f64,
    pub mean_marginal: f64,
    pub mean_conditional: f64,
    pub sigma_g: f64,
    pub sigma_c: f64,
}

impl TrendEntry {
    pub fn from_scores(step: u64, scores: &[GoldScore]) -> Result<Self> {
        let stats = score_stats(scores)?;
        let n = scores.len() as f64;
        Ok(TrendEntry {
            step,
            mean_gold: scores.iter().map(|s| s.combined).sum::<f64>() / n,
            mean_marginal: scores.iter().map(|s| s.marginal).sum::<f64>() / n,
            mean_conditional: scores.iter().map(|s| s.conditional).sum::<f64>() / n,
            sigma_g: stats.sigma_g,
            sigma_c: stats.sigma_c,
        })
    }
}

/// Generated-sample GOLD statistics over training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendLog {
    entries: Vec<TrendEntry>,
}

impl TrendLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TrendEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: TrendEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.step <= last.step {
                return Err(Error::State(format!(
                    "trend steps must increase: {} after {}",
                    entry.step, last.step
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn to_table(&self, config_hash: Option<&str>) -> Table {
        let mut t = Table::new(&TREND_COLUMNS);
        t.config_hash = config_hash.map(str::to_string);
        for e in &self.entries {
            t.push(vec![
                e.step as f64,
                e.mean_gold,
                e.mean_marginal,
                e.mean_conditional,
                e.sigma_g,
                e.sigma_c,
            ]);
        }
        t
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        let cols: Vec<usize> = TREND_COLUMNS
            .iter()
            .map(|c| t.column(c).expect("checked by parse_with"))
            .collect();
        let mut log = TrendLog::new();
        for row in &t.rows {
            log.push(TrendEntry {
                step: row[cols[0]] as u64,
                mean_gold: row[cols[1]],
                mean_marginal: row[cols[2]],
                mean_conditional: row[cols[3]],
                sigma_g: row[cols[4]],
                sigma_c: row[cols[5]],
            })?;
        }
        Ok(log)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::from_table(&Table::parse_with(text, &TREND_COLUMNS)?)
    }
}

/// Score generated samples of the given classes with the raw estimator.
pub fn score_generated<R: rand::Rng + ?Sized>(
    model: &CGanModel,
    classes: Vec<usize>,
    rng: &mut R,
) -> Result<Vec<GoldScore>> {
    let latent = LatentBatch::sample_for(classes, model.latent_dim(), rng);
    let x = model.generate(&latent.z, &latent.classes)?;
    let out = model.discriminate(&x)?;
    latent
        .classes
        .iter()
        .enumerate()
        .map(|(i, &c)| Ok(gold(out.d_g[i], out.d_c_at(i, c), Provenance::Generated)?.with_class(c)))
        .collect()
}

/// Score a fresh generated probe batch of `probe_size` samples (classes
/// cycling) and append the statistics at `step`.
pub fn log_trend<R: rand::Rng + ?Sized>(
    model: &CGanModel,
    probe_size: usize,
    step: u64,
    log: &mut TrendLog,
    rng: &mut R,
) -> Result<()> {
    let classes = (0..probe_size).map(|i| i % model.class_count).collect();
    let scores = score_generated(model, classes, rng)?;
    log.push(TrendEntry::from_scores(step, &scores)?)
}
