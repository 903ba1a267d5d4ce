use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cgan::{ArchConfig, BatchPlan, CGanModel, RealBatch, TrainConfig};
use crate::data::{derive_seed, seeded, Sample, SampleId, SamplePool};
use crate::eval::{model_fitting_capacity, EvalConfig};
use crate::gold::{gold_unlabeled, rebalance, score_stats, GoldScore, ScoreStats};
use crate::nn::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActiveConfig {
    pub initial_n: usize,
    pub query_n: usize,
    pub final_n: usize,
    /// Training epochs per round; an epoch is one pass over the unlabeled pool.
    pub epochs: usize,
    /// Validation fitting capacity is measured every this many epochs.
    pub eval_interval: usize,
    pub validation_size: usize,
    pub pool_size: usize,
    pub test_size: usize,
    pub trials: usize,
    pub balanced: bool,
    pub lambda_c: f64,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        ActiveConfig {
            initial_n: 4,
            query_n: 1,
            final_n: 8,
            epochs: 100,
            eval_interval: 10,
            validation_size: 100,
            pool_size: 1000,
            test_size: 1000,
            trials: 25,
            balanced: true,
            lambda_c: 0.01,
        }
    }
}

impl ActiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_n == 0 && self.final_n != self.initial_n {
            return Err(Error::Config(
                "active.query_n must be positive when final_n > initial_n".into(),
            ));
        }
        if self.final_n < self.initial_n
            || (self.query_n > 0 && (self.final_n - self.initial_n) % self.query_n != 0)
        {
            return Err(Error::Config(format!(
                "active triplet ({}, {}, {}): final_n - initial_n must be a non-negative multiple of query_n",
                self.initial_n, self.query_n, self.final_n
            )));
        }
        if self.epochs == 0 || self.eval_interval == 0 {
            return Err(Error::Config(
                "active.epochs and active.eval_interval must be positive".into(),
            ));
        }
        if self.final_n - self.initial_n > self.pool_size {
            return Err(Error::Config(
                "active.pool_size is smaller than the number of queries".into(),
            ));
        }
        if !(self.lambda_c >= 0.0) {
            return Err(Error::Config("active.lambda_c must be >= 0".into()));
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        if self.query_n == 0 {
            0
        } else {
            (self.final_n - self.initial_n) / self.query_n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acquisition {
    Gold,
    Random,
}

impl Acquisition {
    pub fn as_str(self) -> &'static str {
        match self {
            Acquisition::Gold => "gold",
            Acquisition::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled_size: usize,
    /// Test-set fitting capacity of the selected checkpoint.
    pub fitting_capacity: f64,
    pub validation_capacity: f64,
    /// Epoch (1-based) of the selected checkpoint.
    pub best_epoch: usize,
    /// Labels acquired after this round's training.
    pub selected_ids: Vec<SampleId>,
    pub sigma_g: Option<f64>,
    pub sigma_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveState {
    pub round: usize,
    pub triplet: (usize, usize, usize),
    pub acquisition: Acquisition,
    pub history: Vec<RoundRecord>,
    pub best_checkpoint: Option<String>,
}

/// GOLD scores of the whole unlabeled pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolScores {
    pub ids: Vec<SampleId>,
    pub scores: Vec<GoldScore>,
    pub stats: Option<ScoreStats>,
}

/// Score every unlabeled sample; with `balanced`, the entropy term is
/// rescaled by `σ_G/σ_C` computed over the full pool.
pub fn score_pool(model: &CGanModel, pool: &SamplePool, balanced: bool) -> Result<PoolScores> {
    let unl = pool.unlabeled();
    if unl.is_empty() {
        return Err(Error::State("unlabeled pool is empty".into()));
    }
    let rows: Vec<&[f64]> = unl.iter().map(|s| s.x.as_slice()).collect();
    let out = model.discriminate(&Tensor::from_rows(&rows, model.data_dim)?)?;
    let raw: Vec<GoldScore> = (0..unl.len())
        .map(|i| gold_unlabeled(out.d_g[i], out.d_c.row(i), None))
        .collect::<Result<_>>()?;
    let stats = if raw.len() >= 2 {
        Some(score_stats(&raw)?)
    } else {
        None
    };
    let scores = match (balanced, stats.as_ref().map(|s| s.ratio())) {
        (true, Some(Ok(ratio))) => raw.iter().map(|s| rebalance(s, ratio)).collect(),
        (true, Some(Err(e))) => {
            log::warn!("{e}; ranking the pool with the raw estimator");
            raw
        }
        _ => raw,
    };
    Ok(PoolScores {
        ids: unl.iter().map(|s| s.id).collect(),
        scores,
        stats,
    })
}

/// Top `k` ids by score, descending; equal scores go to the smaller id.
pub fn top_k(ids: &[SampleId], combined: &[f64], k: usize) -> Result<Vec<SampleId>> {
    if ids.is_empty() {
        return Err(Error::State("cannot select from an empty pool".into()));
    }
    if k > ids.len() {
        return Err(Error::OutOfRange {
            index: k,
            len: ids.len(),
        });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        combined[b]
            .total_cmp(&combined[a])
            .then(ids[a].cmp(&ids[b]))
    });
    Ok(order.into_iter().take(k).map(|i| ids[i]).collect())
}

/// The `k` unlabeled samples with the highest GOLD score.
pub fn acquire_queries(
    model: &CGanModel,
    pool: &SamplePool,
    k: usize,
    balanced: bool,
) -> Result<Vec<SampleId>> {
    let s = score_pool(model, pool, balanced)?;
    let combined: Vec<f64> = s.scores.iter().map(|g| g.combined).collect();
    top_k(&s.ids, &combined, k)
}

fn random_queries<R: rand::Rng + ?Sized>(
    pool: &SamplePool,
    k: usize,
    rng: &mut R,
) -> Result<Vec<SampleId>> {
    let unl = pool.unlabeled();
    if k > unl.len() {
        return Err(Error::OutOfRange {
            index: k,
            len: unl.len(),
        });
    }
    let mut ids: Vec<SampleId> = index::sample(rng, unl.len(), k)
        .into_iter()
        .map(|i| unl[i].id)
        .collect();
    ids.sort();
    Ok(ids)
}

/// Inputs shared by every round of one active-learning run.
#[derive(Debug, Clone)]
pub struct ActiveSetup<'a> {
    pub arch: &'a ArchConfig,
    pub train: &'a TrainConfig,
    pub active: &'a ActiveConfig,
    pub eval: &'a EvalConfig,
    pub validation: &'a [Sample],
}

/// Called once per round after training, before labels are acquired;
/// scores are absent on the final round.
pub type RoundObserver<'o> =
    dyn FnMut(usize, &CGanModel, &SamplePool, Option<&PoolScores>) -> Result<()> + 'o;

/// Train, keep the best-validation checkpoint, acquire labels, reset the
/// discriminator; repeat for every round. Training draws from a stream
/// derived from `seed` that acquisition never touches, so two runs on the
/// same seed agree until their first differing query.
pub fn active_learning_run(
    mut pool: SamplePool,
    setup: &ActiveSetup<'_>,
    acquisition: Acquisition,
    seed: u64,
    mut observer: Option<&mut RoundObserver<'_>>,
) -> Result<(ActiveState, CGanModel, SamplePool)> {
    let active = setup.active;
    active.validate()?;
    if pool.labeled().len() != active.initial_n {
        return Err(Error::State(format!(
            "pool has {} labeled samples, triplet starts at {}",
            pool.labeled().len(),
            active.initial_n
        )));
    }
    let train = TrainConfig {
        lambda_c: active.lambda_c,
        ..setup.train.clone()
    };
    let mut train_rng = seeded(derive_seed(seed, 1));
    let mut query_rng = seeded(derive_seed(seed, 2));
    let test: Vec<Sample> = pool
        .test()
        .iter()
        .map(|s| Sample::new(s.x.clone(), s.class))
        .collect();
    let unlabeled: Vec<Vec<f64>> = pool.unlabeled().iter().map(|s| s.x.clone()).collect();
    let dim = unlabeled.first().map_or(0, Vec::len);
    let mut model = CGanModel::new(
        setup.arch.clone(),
        dim,
        pool.class_count(),
        &train,
        &mut train_rng,
    )?;
    let mut state = ActiveState {
        round: 0,
        triplet: (active.initial_n, active.query_n, active.final_n),
        acquisition,
        history: Vec::new(),
        best_checkpoint: None,
    };
    let rounds = active.rounds();
    for round in 0..=rounds {
        if round > 0 {
            model.reinit_discriminator(&mut train_rng);
        }
        let labeled: Vec<Sample> = pool
            .labeled()
            .iter()
            .map(|s| Sample::new(s.x.clone(), s.class))
            .collect();
        let steps = BatchPlan::steps_per_epoch(labeled.len(), unlabeled.len(), train.batch_size);
        let mut plan = BatchPlan::new();
        let mut best: Option<(f64, usize, CGanModel)> = None;
        for epoch in 1..=active.epochs {
            for _ in 0..steps {
                let (lab, unl) = plan.next(&labeled, &unlabeled, &train, &mut train_rng);
                model.train_step(
                    RealBatch {
                        labeled: &lab,
                        unlabeled: &unl,
                    },
                    &train,
                    &mut train_rng,
                )?;
            }
            if epoch % active.eval_interval == 0 || epoch == active.epochs {
                let v = model_fitting_capacity(&model, setup.validation, setup.eval)?.accuracy;
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, epoch, model.clone()));
                }
            }
        }
        let (validation_capacity, best_epoch, best_model) =
            best.expect("at least one evaluation per round");
        model = best_model;
        let fitting_capacity = model_fitting_capacity(&model, &test, setup.eval)?.accuracy;
        let mut record = RoundRecord {
            round,
            labeled_size: pool.labeled().len(),
            fitting_capacity,
            validation_capacity,
            best_epoch,
            selected_ids: Vec::new(),
            sigma_g: None,
            sigma_c: None,
        };
        if round < rounds {
            let scores = score_pool(&model, &pool, active.balanced)?;
            if let Some(obs) = observer.as_mut() {
                obs(round, &model, &pool, Some(&scores))?;
            }
            record.sigma_g = scores.stats.map(|s| s.sigma_g);
            record.sigma_c = scores.stats.map(|s| s.sigma_c);
            let ids = match acquisition {
                Acquisition::Gold => {
                    let combined: Vec<f64> = scores.scores.iter().map(|g| g.combined).collect();
                    top_k(&scores.ids, &combined, active.query_n)?
                }
                Acquisition::Random => random_queries(&pool, active.query_n, &mut query_rng)?,
            };
            for &id in &ids {
                pool.label_query_id(id)?;
            }
            record.selected_ids = ids;
        } else if let Some(obs) = observer.as_mut() {
            obs(round, &model, &pool, None)?;
        }
        log::info!(
            "{} round {round}: {} labels, fitting capacity {:.4}",
            acquisition.as_str(),
            record.labeled_size,
            record.fitting_capacity
        );
        state.round = round;
        state.history.push(record);
    }
    Ok((state, model, pool))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTrial {
    pub seed: u64,
    pub gold: ActiveState,
    pub random: ActiveState,
}

impl PairedTrial {
    pub fn final_capacities(&self) -> (f64, f64) {
        let last = |s: &ActiveState| s.history.last().map_or(f64::NAN, |r| r.fitting_capacity);
        (last(&self.gold), last(&self.random))
    }
}

/// Both acquisition arms from the same pool and seed.
pub fn paired_trial(pool: &SamplePool, setup: &ActiveSetup<'_>, seed: u64) -> Result<PairedTrial> {
    let (gold, _, _) = active_learning_run(pool.clone(), setup, Acquisition::Gold, seed, None)?;
    let (random, _, _) = active_learning_run(pool.clone(), setup, Acquisition::Random, seed, None)?;
    Ok(PairedTrial { seed, gold, random })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided `P(W ≥ wins)` under `W ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

/// Paired sign test for `a > b`; ties are dropped.
pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let wins = pairs.iter().filter(|(a, b)| a > b).count();
    let losses = pairs.iter().filter(|(a, b)| a < b).count();
    let n = wins + losses;
    let p_value = (wins..=n)
        .map(|k| binomial_half(n, k))
        .sum::<f64>()
        .min(1.0);
    SignTest {
        wins,
        losses,
        ties: pairs.len() - n,
        p_value,
    }
}

/// `C(n, k) / 2ⁿ`
fn binomial_half(n: usize, k: usize) -> f64 {
    let ln_c: f64 = (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum();
    (ln_c - n as f64 * std::f64::consts::LN_2).exp()
}
