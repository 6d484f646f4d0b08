//! Empirical concentration probes.
//!
//! * Bandit probe: a single bandit played by the polynomial-bonus strategy;
//!   the estimate is the power mean of the arm means weighted by pull counts.
//! * Lemma probe: one Q-node whose estimate is the empirical reward mean plus
//!   `γ` times the visit-weighted child estimates, with children drawn from a
//!   known categorical distribution.
//!
//! Both report, for each budget `n` and tolerance `ε`, the fraction of
//! replications whose estimate misses the target by more than `ε`.

use rand::Rng;

use super::config::{ArmDist, ProbeConfig, ProbeKind};
use super::par::{map_indexed, trial_rng};
use super::records::{ExperimentRecord, Metric};
use super::stats::fit_polynomial_rate;
use crate::error::{invalid, Result};
use crate::estimators::{power_mean, RunningMean};
use crate::schedule::BonusSchedule;

const DOMAIN_PROBE: u32 = 7;

fn draw<R: Rng + ?Sized>(dist: ArmDist, rng: &mut R) -> f64 {
    match dist {
        ArmDist::Bernoulli(m) => {
            if rng.random::<f64>() < m {
                1.0
            } else {
                0.0
            }
        }
        ArmDist::Constant(m) => m,
    }
}

/// Absolute estimation error of one bandit run at each budget.
pub fn bandit_errors<R: Rng + ?Sized>(
    arms: &[ArmDist],
    p: f64,
    schedule: &BonusSchedule,
    budgets: &[u64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let best = arms
        .iter()
        .map(|a| a.mean())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut means = vec![RunningMean::new(); arms.len()];
    let mut errors = Vec::with_capacity(budgets.len());
    let mut pulls = 0u64;
    for &target in budgets {
        while pulls < target {
            let mut pick = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (a, m) in means.iter().enumerate() {
                let score = m.mean() + schedule.bonus(0, pulls, m.count())?;
                if score > best_score {
                    best_score = score;
                    pick = a;
                }
            }
            means[pick].push(draw(arms[pick], rng))?;
            pulls += 1;
        }
        let values: Vec<f64> = means.iter().map(|m| m.mean()).collect();
        let counts: Vec<u64> = means.iter().map(|m| m.count()).collect();
        errors.push((power_mean(&values, &counts, p)? - best).abs());
    }
    Ok(errors)
}

/// Absolute estimation error of one Lemma-probe run at each budget.
pub fn lemma_errors<R: Rng + ?Sized>(
    probe: &ProbeConfig,
    budgets: &[u64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let target = probe.reward.mean()
        + probe.gamma
            * probe
                .child_probs
                .iter()
                .zip(&probe.child_values)
                .map(|(p, v)| p * v)
                .sum::<f64>();
    let mut reward = RunningMean::new();
    let mut children = vec![RunningMean::new(); probe.child_probs.len()];
    let mut errors = Vec::with_capacity(budgets.len());
    for &n in budgets {
        while reward.count() < n {
            reward.push(draw(probe.reward, rng))?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut m = probe.child_probs.len() - 1;
            for (i, p) in probe.child_probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    m = i;
                    break;
                }
            }
            // the child estimator: mean of Bernoulli(V_m) playouts
            children[m].push(draw(ArmDist::Bernoulli(probe.child_values[m]), rng))?;
        }
        let mut q = reward.mean();
        for c in &children {
            q += probe.gamma * (c.count() as f64 / n as f64) * c.mean();
        }
        errors.push((q - target).abs());
    }
    Ok(errors)
}

fn check_probe(probe: &ProbeConfig) -> Result<()> {
    if probe.eps.is_empty() || probe.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return invalid("tolerances must be positive");
    }
    match probe.kind {
        ProbeKind::Bandit => {
            if probe.arms.is_empty() {
                return invalid("the bandit probe needs at least one arm");
            }
            let best = probe
                .arms
                .iter()
                .map(|a| a.mean())
                .fold(f64::NEG_INFINITY, f64::max);
            if probe.arms.iter().filter(|a| a.mean() == best).count() > 1 {
                return invalid("the optimal arm mean must be unique");
            }
        }
        ProbeKind::Lemma => {
            let m = probe.child_probs.len();
            if m == 0 || probe.child_values.len() != m {
                return invalid(
                    "child probabilities and values must be non-empty and of equal length",
                );
            }
            if probe.child_probs.iter().any(|p| !(0.0..=1.0).contains(p))
                || (probe.child_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return invalid("child probabilities must form a distribution");
            }
            if probe.child_values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return invalid("child values must lie in [0, 1]");
            }
            if !(0.0..=1.0).contains(&probe.gamma) {
                return invalid("discount must lie in [0, 1]");
            }
        }
    }
    Ok(())
}

/// Runs `replications` independent probe runs and returns one frequency row
/// per `(ε, n)`, followed by one slope row per `ε` when there are at least
/// three budgets.
///
/// Tail frequencies quickly hit zero, so the slope is fitted to the
/// continuity-corrected frequencies `(k + 1/2) / (R + 1)` for `k` misses out
/// of `R` replications.
///
/// The `env` column reads `bandit:eps=<ε>` or `lemma:eps=<ε>`; `seed` is the
/// master seed.
#[allow(clippy::too_many_arguments)]
pub fn concentration_probe(
    probe: &ProbeConfig,
    p: f64,
    schedule: &BonusSchedule,
    budgets: &[u64],
    replications: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<ExperimentRecord>> {
    check_probe(probe)?;
    if replications < 1 {
        return invalid("at least one replication is required");
    }
    if budgets.is_empty() || budgets[0] == 0 || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("budgets must be positive and strictly increasing");
    }
    let runs = map_indexed(replications, workers, |r| {
        let mut rng = trial_rng(seed, DOMAIN_PROBE, r as u64);
        match probe.kind {
            ProbeKind::Bandit => bandit_errors(&probe.arms, p, schedule, budgets, &mut rng),
            ProbeKind::Lemma => lemma_errors(probe, budgets, &mut rng),
        }
    })?;
    let label = match probe.kind {
        ProbeKind::Bandit => "bandit",
        ProbeKind::Lemma => "lemma",
    };
    let row = |eps: f64, n: u64, metric: Metric, value: f64| ExperimentRecord {
        env: format!("{label}:eps={eps}"),
        algorithm: "probe".into(),
        p,
        c: schedule.c(),
        n_simulations: n,
        seed,
        metric,
        value,
    };
    let mut records = Vec::new();
    let mut slopes = Vec::new();
    for &eps in &probe.eps {
        let misses: Vec<usize> = (0..budgets.len())
            .map(|j| runs.iter().filter(|e| e[j] > eps).count())
            .collect();
        let r = replications as f64;
        for (&n, &k) in budgets.iter().zip(&misses) {
            records.push(row(eps, n, Metric::ConcentrationFreq, k as f64 / r));
        }
        if budgets.len() >= 3 {
            let corrected: Vec<f64> = misses
                .iter()
                .map(|&k| (k as f64 + 0.5) / (r + 1.0))
                .collect();
            slopes.push(row(
                eps,
                0,
                Metric::Slope,
                fit_polynomial_rate(budgets, &corrected)?,
            ));
        }
    }
    records.extend(slopes);
    Ok(records)
}
