use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::rng::standard_normal;
use super::Sample;
use crate::{Error, Result};

/// One Gaussian cluster of the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub weight: f64,
    pub class: usize,
}

/// 2-D Gaussian mixture whose clusters carry class labels. Densities are
/// exact, so it doubles as the ground-truth `p_data` in oracle tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMixture {
    components: Vec<Component>,
    // lower Cholesky factors and log normalizers, per component
    chol: Vec<[f64; 3]>,
    log_norm: Vec<f64>,
    class_count: usize,
}

/// `log p(x)` and `log p(x, c)` for every class.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity {
    pub log_p: f64,
    pub log_joint: Vec<f64>,
}

impl MixtureDensity {
    /// `log p(c | x)`.
    pub fn log_posterior(&self, class: usize) -> f64 {
        self.log_joint[class] - self.log_p
    }
}

impl SyntheticMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let mut chol = Vec::with_capacity(components.len());
        let mut log_norm = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) {
                return Err(Error::Config(format!(
                    "component {i}: weight must be positive"
                )));
            }
            let [[a, b], [b2, d]] = c.cov;
            if (b - b2).abs() > 1e-12 * (a.abs() + d.abs()).max(1.0) {
                return Err(Error::Config(format!(
                    "component {i}: covariance is not symmetric"
                )));
            }
            if !(a > 0.0) {
                return Err(Error::Config(format!(
                    "component {i}: covariance is not positive definite"
                )));
            }
            let l11 = a.sqrt();
            let l21 = b / l11;
            let rem = d - l21 * l21;
            if !(rem > 0.0) {
                return Err(Error::Config(format!(
                    "component {i}: covariance is not positive definite"
                )));
            }
            let l22 = rem.sqrt();
            chol.push([l11, l21, l22]);
            // log det Σ = 2 log(l11 l22)
            log_norm.push(-(2.0 * PI).ln() - (l11 * l22).ln());
        }
        let class_count = components.iter().map(|c| c.class).max().unwrap_or(0) + 1;
        Ok(SyntheticMixture {
            components,
            chol,
            log_norm,
            class_count,
        })
    }

    /// `n` equal-weight isotropic clusters on a circle, angles `k·360°/n`,
    /// classes alternating `k mod 2`.
    pub fn circle(n: usize, radius: f64, variance: f64) -> Result<Self> {
        let comps = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                Component {
                    mean: [radius * t.cos(), radius * t.sin()],
                    cov: [[variance, 0.0], [0.0, variance]],
                    weight: 1.0 / n as f64,
                    class: k % 2,
                }
            })
            .collect();
        Self::new(comps)
    }

    /// Six clusters of variance 0.2 on a radius-4 circle, three per class.
    pub fn default_six() -> Self {
        Self::circle(6, 4.0, 0.2).expect("valid default geometry")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn dim(&self) -> usize {
        2
    }

    /// Draw `n` labeled samples.
    pub fn sample<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Sample> {
        self.sample_with_components(n, rng)
            .into_iter()
            .map(|(s, _)| s)
            .collect()
    }

    /// Draw `n` samples, also returning the source component of each.
    pub fn sample_with_components<R: rand::Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Vec<(Sample, usize)> {
        (0..n)
            .map(|_| {
                let k = self.pick_component(rng.random::<f64>());
                let [l11, l21, l22] = self.chol[k];
                let e1 = standard_normal(rng);
                let e2 = standard_normal(rng);
                let m = self.components[k].mean;
                let x = vec![m[0] + l11 * e1, m[1] + l21 * e1 + l22 * e2];
                (Sample::new(x, self.components[k].class), k)
            })
            .collect()
    }

    /// Draw `n` samples from the components of one class, renormalized.
    pub fn sample_class<R: rand::Rng + ?Sized>(
        &self,
        class: usize,
        n: usize,
        rng: &mut R,
    ) -> Vec<Sample> {
        let idx: Vec<usize> = (0..self.components.len())
            .filter(|&k| self.components[k].class == class)
            .collect();
        let total: f64 = idx.iter().map(|&k| self.components[k].weight).sum();
        (0..n)
            .map(|_| {
                let mut u = rng.random::<f64>() * total;
                let mut k = *idx.last().expect("class has components");
                for &j in &idx {
                    if u < self.components[j].weight {
                        k = j;
                        break;
                    }
                    u -= self.components[j].weight;
                }
                let [l11, l21, l22] = self.chol[k];
                let e1 = standard_normal(rng);
                let e2 = standard_normal(rng);
                let m = self.components[k].mean;
                Sample::new(vec![m[0] + l11 * e1, m[1] + l21 * e1 + l22 * e2], class)
            })
            .collect()
    }

    fn pick_component(&self, mut u: f64) -> usize {
        for (k, c) in self.components.iter().enumerate() {
            if u < c.weight {
                return k;
            }
            u -= c.weight;
        }
        self.components.len() - 1
    }

    fn component_log_pdf(&self, k: usize, x: &[f64]) -> f64 {
        let [l11, l21, l22] = self.chol[k];
        let m = self.components[k].mean;
        // solve L y = x − μ
        let y1 = (x[0] - m[0]) / l11;
        let y2 = (x[1] - m[1] - l21 * y1) / l22;
        self.log_norm[k] - 0.5 * (y1 * y1 + y2 * y2)
    }

    /// Exact log densities at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<MixtureDensity> {
        if x.len() != 2 {
            return Err(Error::dim("SyntheticMixture::log_density", 2, x.len()));
        }
        let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); self.class_count];
        for (k, c) in self.components.iter().enumerate() {
            per_class[c.class].push(c.weight.ln() + self.component_log_pdf(k, x));
        }
        let log_joint: Vec<f64> = per_class.iter().map(|v| log_sum_exp(v)).collect();
        let log_p = log_sum_exp(&log_joint);
        Ok(MixtureDensity { log_p, log_joint })
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
