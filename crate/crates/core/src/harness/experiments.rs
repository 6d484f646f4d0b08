//! Experiment protocols.

use std::collections::BTreeMap;

use rand::RngCore;

use super::config::{AlgorithmSpec, EnvChoice, ExperimentConfig, ExperimentKind};
use super::par::{map_indexed, trial_rng};
use super::probe::concentration_probe;
use super::records::{ExperimentRecord, Metric};
use super::stats::{fit_polynomial_rate, mean_var};
use crate::envs::{exact_root_value, GenerativeModel, SyntheticTree};
use crate::error::{Error, Result};
use crate::mcts::{plan_from, AlgorithmConfig, SearchTree};
use crate::schedule::{derive_schedule, BonusKind, BonusSchedule, Derivation};

const DOMAIN_TREE: u32 = 1;
const DOMAIN_SEARCH: u32 = 2;
const DOMAIN_PLAN: u32 = 3;
const DOMAIN_ENV: u32 = 4;

/// Aggregate of one `(algorithm, n)` cell.
///
/// `half_width` is 2·stderr for convergence curves and 2·std for control
/// returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub env: String,
    pub algorithm: String,
    pub p: f64,
    pub c: f64,
    pub n_simulations: u64,
    pub metric: Metric,
    pub count: usize,
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub summaries: Vec<Summary>,
    /// Algorithms left out, with the reason.
    pub skipped: Skipped,
    /// Grid-search winners, one per algorithm.
    pub winners: Vec<AlgorithmSpec>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::SyntheticConvergence => run_synthetic_convergence(cfg),
        ExperimentKind::ControlEvaluation => run_control_evaluation(cfg),
        ExperimentKind::ConcentrationProbe => run_concentration_probe(cfg),
        ExperimentKind::GridSearch => grid_search_c(cfg),
    }
}

type Skipped = Vec<(AlgorithmSpec, String)>;

/// Resolves each algorithm to a planner; infeasible adaptive schedules are
/// skipped and reported.
fn planners(
    cfg: &ExperimentConfig,
    horizon: usize,
    gamma: f64,
) -> Result<(Vec<(AlgorithmSpec, AlgorithmConfig)>, Skipped)> {
    let mut active = Vec::new();
    let mut skipped = Vec::new();
    for spec in &cfg.algorithms {
        match spec.planner(horizon, gamma, cfg.rollout_cap, cfg.beta_h) {
            Ok(p) => active.push((spec.clone(), p.with_mode(cfg.trajectory_mode))),
            Err(Error::Infeasible(why)) => {
                log::warn!("skipping {spec}: {why}");
                skipped.push((spec.clone(), why));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((active, skipped))
}

/// Seed of synthetic tree `t`.
pub fn tree_seed(master: u64, t: usize) -> u64 {
    trial_rng(master, DOMAIN_TREE, t as u64).next_u64()
}

/// Root-error curves on synthetic trees.
///
/// Trial `i` plans on tree `i / runs_per_tree`; every algorithm of a trial
/// shares the trial's random stream. One tree per trial keeps growing, and
/// its root error is recorded as each budget is reached.
pub fn run_synthetic_convergence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.env != EnvChoice::Synthetic {
        return Err(Error::Config(
            "synthetic convergence runs on the synthetic tree".into(),
        ));
    }
    let trees = cfg.trials.div_ceil(cfg.runs_per_tree);
    let models: Vec<(SyntheticTree, f64)> = map_indexed(trees, cfg.workers, |t| {
        let model = cfg.tree.build(tree_seed(cfg.seed, t))?;
        let exact = exact_root_value(&model, model.discount(), cfg.tree.depth, 0)?;
        Ok((model, exact))
    })?;
    let env = models[0].0.name();
    let (active, skipped) = planners(cfg, cfg.tree.depth, models[0].0.discount())?;
    let a_count = active.len();

    let errors: Vec<Vec<f64>> = map_indexed(cfg.trials * a_count, cfg.workers, |item| {
        let (trial, a) = (item / a_count, item % a_count);
        let (model, exact) = &models[trial / cfg.runs_per_tree];
        let mut rng = trial_rng(cfg.seed, DOMAIN_SEARCH, trial as u64);
        let mut tree = SearchTree::new(model, model.initial_state(), active[a].1.clone())?;
        let mut done = 0;
        let mut out = Vec::with_capacity(cfg.budgets.len());
        for &n in &cfg.budgets {
            while done < n {
                tree.run_trajectory(&mut rng)?;
                done += 1;
            }
            out.push((tree.root_value() - exact).abs());
        }
        Ok(out)
    })?;

    let mut out = ExperimentOutput {
        skipped,
        ..Default::default()
    };
    for (item, errs) in errors.iter().enumerate() {
        let (trial, a) = (item / a_count, item % a_count);
        let spec = &active[a].0;
        for (&n, &e) in cfg.budgets.iter().zip(errs) {
            out.records.push(ExperimentRecord {
                env: env.clone(),
                algorithm: spec.name().into(),
                p: spec.p,
                c: spec.c,
                n_simulations: n,
                seed: trial as u64,
                metric: Metric::RootAbsError,
                value: e,
            });
        }
    }
    for (a, (spec, _)) in active.iter().enumerate() {
        let mut means = Vec::new();
        for (j, &n) in cfg.budgets.iter().enumerate() {
            let xs: Vec<f64> = (0..cfg.trials)
                .map(|t| errors[t * a_count + a][j])
                .collect();
            let (mean, var) = mean_var(&xs);
            means.push(mean);
            out.summaries.push(Summary {
                env: env.clone(),
                algorithm: spec.name().into(),
                p: spec.p,
                c: spec.c,
                n_simulations: n,
                metric: Metric::RootAbsError,
                count: xs.len(),
                mean,
                half_width: 2.0 * (var / xs.len() as f64).sqrt(),
            });
        }
        match fit_polynomial_rate(&cfg.budgets, &means) {
            Ok(slope) => out.records.push(ExperimentRecord {
                env: env.clone(),
                algorithm: spec.name().into(),
                p: spec.p,
                c: spec.c,
                n_simulations: 0,
                seed: cfg.seed,
                metric: Metric::Slope,
                value: slope,
            }),
            Err(e) => log::info!("{spec}: no rate fit ({e})"),
        }
    }
    Ok(out)
}

/// Discounted return of one episode that replans from scratch before every
/// real step and acts greedily.
pub fn evaluate_episode<M: GenerativeModel>(
    model: &M,
    planner: &AlgorithmConfig,
    n: u64,
    plan_rng: &mut impl rand::Rng,
    env_rng: &mut impl rand::Rng,
) -> Result<f64> {
    let gamma = model.discount();
    let mut state = model.initial_state();
    let mut ret = 0.0;
    let mut discount = 1.0;
    for _ in 0..model.step_cap() {
        if model.is_terminal(&state) {
            break;
        }
        let action = plan_from(model, state.clone(), planner, n, plan_rng)?.best_action;
        let step = model.sample(&state, action, env_rng);
        ret += discount * step.reward;
        discount *= gamma;
        if step.terminal {
            break;
        }
        state = step.next;
    }
    Ok(ret)
}

/// Mean discounted return of greedy replanning on a grid world.
///
/// Run `r` uses the same planning and environment streams for every
/// algorithm and budget.
pub fn run_control_evaluation(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let model = cfg.env.grid_world().map_err(|_| {
        Error::Config(format!(
            "control evaluation needs a grid world, got {}",
            cfg.env.as_str()
        ))
    })?;
    let env = model.name();
    let (active, skipped) = planners(cfg, cfg.horizon, model.discount())?;
    let (b_count, runs) = (cfg.budgets.len(), cfg.trials);

    let returns: Vec<f64> = map_indexed(active.len() * b_count * runs, cfg.workers, |item| {
        let (a, b, r) = (
            item / (b_count * runs),
            (item / runs) % b_count,
            item % runs,
        );
        let mut plan_rng = trial_rng(cfg.seed, DOMAIN_PLAN, r as u64);
        let mut env_rng = trial_rng(cfg.seed, DOMAIN_ENV, r as u64);
        evaluate_episode(
            &model,
            &active[a].1,
            cfg.budgets[b],
            &mut plan_rng,
            &mut env_rng,
        )
    })?;

    let mut out = ExperimentOutput {
        skipped,
        ..Default::default()
    };
    for (a, (spec, _)) in active.iter().enumerate() {
        for (b, &n) in cfg.budgets.iter().enumerate() {
            let cell = &returns[(a * b_count + b) * runs..][..runs];
            for (r, &value) in cell.iter().enumerate() {
                out.records.push(ExperimentRecord {
                    env: env.clone(),
                    algorithm: spec.name().into(),
                    p: spec.p,
                    c: spec.c,
                    n_simulations: n,
                    seed: r as u64,
                    metric: Metric::DiscountedReturn,
                    value,
                });
            }
            let (mean, var) = mean_var(cell);
            out.summaries.push(Summary {
                env: env.clone(),
                algorithm: spec.name().into(),
                p: spec.p,
                c: spec.c,
                n_simulations: n,
                metric: Metric::DiscountedReturn,
                count: runs,
                mean,
                half_width: 2.0 * var.sqrt(),
            });
        }
    }
    Ok(out)
}

/// Concentration probe with the first algorithm's `p`, bonus kind and `C`.
pub fn run_concentration_probe(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = cfg
        .algorithms
        .first()
        .ok_or_else(|| Error::Config("the probe needs one algorithm for p, bonus and C".into()))?;
    let schedule = match spec.bonus {
        BonusKind::FixedPolynomial => BonusSchedule::fixed(spec.c, 1)?,
        BonusKind::Logarithmic => BonusSchedule::logarithmic(spec.c, 1)?,
        BonusKind::AdaptivePolynomial => match derive_schedule(1, cfg.beta_h, spec.p, spec.c)? {
            Derivation::Feasible(s) => s,
            Derivation::Infeasible { violation, .. } => {
                return Err(Error::Infeasible(violation.to_string()))
            }
        },
    };
    let records = concentration_probe(
        &cfg.probe,
        spec.p,
        &schedule,
        &cfg.budgets,
        cfg.trials,
        cfg.seed,
        cfg.workers,
    )?;
    Ok(ExperimentOutput {
        records,
        ..Default::default()
    })
}

/// Runs the experiment matching the env (synthetic convergence or control
/// evaluation) once per candidate C, with every algorithm using that C.
///
/// The winner per algorithm has the lowest mean error (synthetic) or highest
/// mean return (control) at the largest budget; ties go to the earlier
/// candidate. Winner rows follow all measurement rows.
pub fn grid_search_c(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.candidates.is_empty() {
        return Err(Error::Config(
            "grid search needs at least one candidate C".into(),
        ));
    }
    let synthetic = cfg.env == EnvChoice::Synthetic;
    let last = *cfg.budgets.last().expect("validated non-empty");
    let mut out = ExperimentOutput::default();
    // per algorithm index: (best score, best C)
    let mut best: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut env = String::new();
    for &c in &cfg.candidates {
        let mut run = cfg.clone();
        run.kind = if synthetic {
            ExperimentKind::SyntheticConvergence
        } else {
            ExperimentKind::ControlEvaluation
        };
        for a in &mut run.algorithms {
            a.c = c;
        }
        let res = run_experiment(&run)?;
        for (i, spec) in run.algorithms.iter().enumerate() {
            let Some(s) = res
                .summaries
                .iter()
                .find(|s| s.n_simulations == last && s.algorithm == spec.name() && s.p == spec.p)
            else {
                continue;
            };
            env = s.env.clone();
            let score = if synthetic { -s.mean } else { s.mean };
            let entry = best.entry(i).or_insert((f64::NEG_INFINITY, c));
            if score > entry.0 {
                *entry = (score, c);
            }
        }
        out.records.extend(res.records);
        out.summaries.extend(res.summaries);
        if out.skipped.is_empty() {
            out.skipped = res.skipped;
        }
    }
    for (i, (_, c)) in best {
        let spec = AlgorithmSpec {
            c,
            ..cfg.algorithms[i].clone()
        };
        out.records.push(ExperimentRecord {
            env: env.clone(),
            algorithm: spec.name().into(),
            p: spec.p,
            c,
            n_simulations: last,
            seed: cfg.seed,
            metric: Metric::BestC,
            value: c,
        });
        out.winners.push(spec);
    }
    Ok(out)
}
