use serde::{Deserialize, Serialize};

use crate::gold::GoldScore;
use crate::table::Table;
use crate::{Error, Result};

pub const HISTOGRAM_COLUMNS: [&str; 7] = [
    "bin",
    "marginal_lo",
    "marginal_hi",
    "marginal_count",
    "conditional_lo",
    "conditional_hi",
    "conditional_count",
];

/// Equal-width bins over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Bins {
    pub fn build(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins];
        let width = hi - lo;
        for &v in values {
            let i = if width > 0.0 {
                (((v - lo) / width) * bins as f64).floor() as usize
            } else {
                0
            };
            counts[i.min(bins - 1)] += 1;
        }
        Bins { lo, hi, counts }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub marginal: Bins,
    pub conditional: Bins,
}

impl Histogram {
    pub fn to_table(&self, config_hash: Option<&str>) -> Table {
        let mut t = Table::new(&HISTOGRAM_COLUMNS);
        t.config_hash = config_hash.map(str::to_string);
        for i in 0..self.marginal.counts.len() {
            let (mlo, mhi) = self.marginal.edges(i);
            let (clo, chi) = self.conditional.edges(i);
            t.push(vec![
                i as f64,
                mlo,
                mhi,
                self.marginal.counts[i] as f64,
                clo,
                chi,
                self.conditional.counts[i] as f64,
            ]);
        }
        t
    }
}

/// Histograms of the marginal and (signed) conditional terms.
pub fn export_histogram(scores: &[GoldScore], bins: usize) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::State("histogram of an empty score set".into()));
    }
    if bins == 0 {
        return Err(Error::Config("histogram bin count must be positive".into()));
    }
    let m: Vec<f64> = scores.iter().map(|s| s.marginal).collect();
    let c: Vec<f64> = scores.iter().map(|s| s.conditional).collect();
    Ok(Histogram {
        marginal: Bins::build(&m, bins),
        conditional: Bins::build(&c, bins),
    })
}
