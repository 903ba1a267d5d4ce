//! Datasets: the synthetic Gaussian mixture with exact densities, IDX
//! image files, feature standardization and labeled/unlabeled/test pools.

mod idx;
mod mixture;
mod pool;
mod rng;

pub use idx::{
    load_idx, parse_idx_images, parse_idx_labels, write_idx, IdxImages, IDX_IMAGE_MAGIC,
    IDX_LABEL_MAGIC,
};
pub use mixture::{Component, MixtureDensity, SyntheticMixture};
pub use pool::{make_pool, LabeledSample, SampleId, SamplePool, UnlabeledSample};
pub use rng::{derive_seed, seeded, standard_normal, Rng};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::{Error, Result};

/// A feature vector with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub class: usize,
}

impl Sample {
    pub fn new(x: Vec<f64>, class: usize) -> Self {
        Sample { x, class }
    }
}

/// Rows of `samples` as a tensor of features.
pub fn features(samples: &[Sample]) -> Result<Tensor> {
    let dim = samples.first().map_or(0, |s| s.x.len());
    Tensor::from_rows(
        &samples.iter().map(|s| s.x.as_slice()).collect::<Vec<_>>(),
        dim,
    )
}

/// Per-feature affine standardization `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit on rows. Constant features keep unit scale.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::Config("cannot standardize an empty dataset".into()));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn transform_samples(&self, samples: &[Sample]) -> Vec<Sample> {
        samples
            .iter()
            .map(|s| Sample::new(self.transform(&s.x), s.class))
            .collect()
    }
}

/// CSV with columns `x1..xd,class`.
pub fn write_samples_csv<W: Write>(w: &mut W, samples: &[Sample]) -> std::io::Result<()> {
    let dim = samples.first().map_or(2, |s| s.x.len());
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "{},class", header.join(","))?;
    for s in samples {
        let xs: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", xs.join(","), s.class)?;
    }
    Ok(())
}

/// Parse the format written by [`write_samples_csv`].
pub fn read_samples_csv(text: &str) -> Result<Vec<Sample>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty sample CSV".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || !header.ends_with("class") {
        return Err(Error::Config(format!(
            "sample CSV header must end with 'class': {header}"
        )));
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Config(format!(
                "line {}: expected {cols} fields",
                ln + 2
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number '{s}'", ln + 2)))
        };
        let x = fields[..cols - 1]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<Vec<_>>>()?;
        let class = fields[cols - 1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {}: bad class", ln + 2)))?;
        out.push(Sample::new(x, class));
    }
    Ok(out)
}
