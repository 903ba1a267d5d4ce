//! Scalar examples for the raw, balanced and unlabeled estimators, checked
//! against hand-evaluated closed forms.

use gold_core::data::{seeded, Component, SyntheticMixture};
use gold_core::gold::{
    entropy, gold, gold_balanced, gold_oracle_check, gold_unlabeled, score_stats, GoldScore,
    Provenance, ScoreStats,
};
use rand::Rng;
use std::f64::consts::LN_2;

pub const TOL: f64 = 1e-9;

fn stats(sigma_g: f64, sigma_c: f64) -> ScoreStats {
    ScoreStats {
        sigma_g,
        sigma_c,
        n: 10,
    }
}

fn score(marginal: f64, conditional: f64) -> GoldScore {
    GoldScore {
        marginal,
        conditional,
        combined: marginal + conditional,
        provenance: Provenance::Generated,
        class: None,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < TOL
}

/// Named pass/fail results, one per example.
pub fn examples() -> Vec<(&'static str, bool)> {
    let both = [Provenance::Real, Provenance::Generated];
    let raw = |d_g, d_c, p| gold(d_g, d_c, p).unwrap().combined;
    let mut out = vec![
        (
            "neutral discriminator, perfect class",
            both.iter().all(|&p| close(raw(0.5, 1.0, p), 0.0)),
        ),
        (
            "real 0.8/0.5 = ln 8",
            close(raw(0.8, 0.5, Provenance::Real), 8f64.ln()),
        ),
        (
            "generated 0.2/0.5 = ln 0.25 + ln 0.5",
            close(
                raw(0.2, 0.5, Provenance::Generated),
                0.25f64.ln() + 0.5f64.ln(),
            ),
        ),
        (
            "balanced with unit ratio equals raw",
            both.iter().all(|&p| {
                close(
                    gold_balanced(0.3, 0.6, p, &stats(0.7, 0.7))
                        .unwrap()
                        .combined,
                    raw(0.3, 0.6, p),
                )
            }),
        ),
        (
            "balanced generated 0.5/e^-1 with ratio 2 = -2",
            close(
                gold_balanced(0.5, (-1f64).exp(), Provenance::Generated, &stats(2.0, 1.0))
                    .unwrap()
                    .combined,
                -2.0,
            ),
        ),
        (
            "balanced invariant to common sigma scale",
            close(
                gold_balanced(0.7, 0.4, Provenance::Real, &stats(2.0, 1.0))
                    .unwrap()
                    .combined,
                gold_balanced(0.7, 0.4, Provenance::Real, &stats(6.0, 3.0))
                    .unwrap()
                    .combined,
            ),
        ),
        ("entropy of one-hot = 0", entropy(&[1.0, 0.0]) == 0.0),
        (
            "entropy of uniform K=2 = ln 2",
            close(entropy(&[0.5, 0.5]), LN_2),
        ),
        (
            "entropy of [0.75, 0.25]",
            close(
                entropy(&[0.75, 0.25]),
                -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln()),
            ),
        ),
        (
            "unlabeled 0.5/one-hot = 0",
            close(
                gold_unlabeled(0.5, &[1.0, 0.0], None).unwrap().combined,
                0.0,
            ),
        ),
        (
            "unlabeled 0.9/uniform = ln 9 + ln 2",
            close(
                gold_unlabeled(0.9, &[0.5, 0.5], None).unwrap().combined,
                9f64.ln() + LN_2,
            ),
        ),
        (
            "balanced unlabeled with unit ratio equals raw",
            close(
                gold_unlabeled(0.9, &[0.3, 0.7], Some(&stats(1.3, 1.3)))
                    .unwrap()
                    .combined,
                gold_unlabeled(0.9, &[0.3, 0.7], None).unwrap().combined,
            ),
        ),
        ("identical scores have zero spread", {
            let s = score_stats(&vec![score(0.4, -0.2); 5]).unwrap();
            s.sigma_g == 0.0 && s.sigma_c == 0.0
        }),
        ("hand-computed population std", {
            let s = score_stats(&[score(-1.0, -1.0), score(1.0, -3.0)]).unwrap();
            close(s.sigma_g, 1.0) && close(s.sigma_c, 1.0)
        }),
        (
            "score stats are order independent",
            score_stats(&[score(-1.0, -1.0), score(1.0, -3.0), score(0.3, -0.1)]).unwrap()
                == score_stats(&[score(0.3, -0.1), score(1.0, -3.0), score(-1.0, -1.0)]).unwrap(),
        ),
    ];
    out.push(("identical mixtures give zero surrogate marginal", {
        let m = SyntheticMixture::default_six();
        let mut rng = seeded(3);
        (0..100).all(|_| {
            let x = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
            gold_oracle_check(&m, &m, &x, 0)
                .unwrap()
                .surrogate_marginal
                .abs()
                < TOL
        })
    }));
    out.push(("density ratio 2 gives ln 2", {
        let unit = [[1.0, 0.0], [0.0, 1.0]];
        let data = SyntheticMixture::new(vec![Component {
            mean: [0.0, 0.0],
            cov: unit,
            weight: 1.0,
            class: 0,
        }])
        .unwrap();
        let model = SyntheticMixture::new(vec![
            Component {
                mean: [0.0, 0.0],
                cov: unit,
                weight: 0.5,
                class: 0,
            },
            Component {
                mean: [100.0, 100.0],
                cov: unit,
                weight: 0.5,
                class: 0,
            },
        ])
        .unwrap();
        close(
            gold_oracle_check(&data, &model, &[0.0, 0.0], 0)
                .unwrap()
                .surrogate_marginal,
            LN_2,
        )
    }));
    out.push(("sign convention on a grid", sign_convention_holds()));
    out
}

/// Real samples never lose from the class term, generated samples never
/// gain from it.
pub fn sign_convention_holds() -> bool {
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    grid.iter().all(|&d_g| {
        grid.iter().all(|&d_c| {
            gold(d_g, d_c, Provenance::Real).unwrap().conditional >= 0.0
                && gold(d_g, d_c, Provenance::Generated).unwrap().conditional <= 0.0
        })
    })
}

/// Largest `|surrogate − log(p_data/p_g)|` over `n` points for two
/// different synthetic mixtures.
pub fn oracle_max_error(n: usize, seed: u64) -> f64 {
    let data = SyntheticMixture::default_six();
    let model = SyntheticMixture::circle(6, 3.0, 0.5).unwrap();
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let x = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
            let c = gold_oracle_check(&data, &model, &x, rng.random_range(0..2)).unwrap();
            (c.surrogate_marginal - c.true_marginal).abs()
        })
        .fold(0.0, f64::max)
}
