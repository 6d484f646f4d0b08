//! Experiment configuration: algorithm presets, environments and the flat
//! `key = value` settings format shared by config files and CLI flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::envs::{GridWorld, SyntheticTree, SyntheticTreeSpec};
use crate::error::{Error, Result};
use crate::mcts::{AlgorithmConfig, TrajectoryMode};
use crate::schedule::{derive_schedule, BonusKind, BonusSchedule, Derivation};

/// Planner family. The family fixes the backup order and bonus kind unless
/// stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Mean backup with the logarithmic bonus.
    Uct,
    /// Power-mean backup with the logarithmic bonus.
    PowerUct,
    /// Mean backup with the polynomial bonus.
    FixedDepth,
    /// Power-mean backup with a polynomial bonus (fixed or adaptive).
    StochasticPowerUct,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Uct => "uct",
            Family::PowerUct => "power-uct",
            Family::FixedDepth => "fixed-depth",
            Family::StochasticPowerUct => "spuct",
        }
    }
}

/// One planner to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub family: Family,
    pub p: f64,
    pub bonus: BonusKind,
    pub c: f64,
}

impl AlgorithmSpec {
    pub fn uct(c: f64) -> Self {
        Self {
            family: Family::Uct,
            p: 1.0,
            bonus: BonusKind::Logarithmic,
            c,
        }
    }

    pub fn power_uct(p: f64, c: f64) -> Self {
        Self {
            family: Family::PowerUct,
            p,
            bonus: BonusKind::Logarithmic,
            c,
        }
    }

    pub fn fixed_depth(c: f64) -> Self {
        Self {
            family: Family::FixedDepth,
            p: 1.0,
            bonus: BonusKind::FixedPolynomial,
            c,
        }
    }

    pub fn spuct(p: f64, c: f64) -> Self {
        Self {
            family: Family::StochasticPowerUct,
            p,
            bonus: BonusKind::FixedPolynomial,
            c,
        }
    }

    pub fn name(&self) -> &'static str {
        self.family.as_str()
    }

    /// Parses `family[:p][@C]`, e.g. `uct@1.25`, `power-uct:2`,
    /// `spuct:2.2@0.5`. Missing parts come from `default_p`, `default_c` and
    /// `bonus` (the last only matters for `spuct`).
    pub fn parse(text: &str, default_p: f64, default_c: f64, bonus: BonusKind) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("algorithm {text:?}: {why}"));
        let (head, c) = match text.split_once('@') {
            Some((h, c)) => (
                h,
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| bad("C is not a number"))?,
            ),
            None => (text, default_c),
        };
        let (family, p) = match head.split_once(':') {
            Some((f, p)) => (
                f,
                Some(
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| bad("p is not a number"))?,
                ),
            ),
            None => (head, None),
        };
        let spec = match family.trim() {
            "uct" if p.is_none() => Self::uct(c),
            "fixed-depth" if p.is_none() => Self::fixed_depth(c),
            "uct" | "fixed-depth" => return Err(bad("this family always uses p = 1")),
            "power-uct" => Self::power_uct(p.unwrap_or(default_p), c),
            "spuct" => Self {
                bonus,
                ..Self::spuct(p.unwrap_or(default_p), c)
            },
            _ => return Err(bad("unknown family (uct, power-uct, fixed-depth, spuct)")),
        };
        if !(spec.c.is_finite() && spec.c > 0.0) {
            return Err(bad("C must be positive"));
        }
        if !(spec.p.is_finite() && spec.p >= 1.0) {
            return Err(bad("p must be >= 1"));
        }
        Ok(spec)
    }

    /// Planner settings for a depth-`horizon` search.
    ///
    /// Adaptive bonuses derive their constants from `beta_h`; an infeasible
    /// derivation is reported as [`Error::Infeasible`].
    pub fn planner(
        &self,
        horizon: usize,
        gamma: f64,
        rollout_cap: usize,
        beta_h: f64,
    ) -> Result<AlgorithmConfig> {
        let schedule = match self.bonus {
            BonusKind::FixedPolynomial => BonusSchedule::fixed(self.c, horizon)?,
            BonusKind::Logarithmic => BonusSchedule::logarithmic(self.c, horizon)?,
            BonusKind::AdaptivePolynomial => {
                match derive_schedule(horizon, beta_h, self.p, self.c)? {
                    Derivation::Feasible(s) => s,
                    Derivation::Infeasible { violation, .. } => {
                        return Err(Error::Infeasible(format!(
                            "{} p={} H={horizon} beta_H={beta_h}: {violation}",
                            self.name(),
                            self.p
                        )))
                    }
                }
            }
        };
        Ok(AlgorithmConfig::new(self.p, schedule, gamma)?.with_rollout_cap(rollout_cap))
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.name(), self.p, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvChoice {
    Synthetic,
    FrozenLake4,
    FrozenLake8,
    Taxi,
}

impl EnvChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvChoice::Synthetic => "synthetic",
            EnvChoice::FrozenLake4 => "frozenlake4",
            EnvChoice::FrozenLake8 => "frozenlake8",
            EnvChoice::Taxi => "taxi",
        }
    }

    pub fn grid_world(self) -> Result<GridWorld> {
        match self {
            EnvChoice::FrozenLake4 => GridWorld::frozenlake(4),
            EnvChoice::FrozenLake8 => GridWorld::frozenlake(8),
            EnvChoice::Taxi => GridWorld::taxi(),
            EnvChoice::Synthetic => Err(Error::Config(
                "the synthetic tree is not a grid world".into(),
            )),
        }
    }
}

impl FromStr for EnvChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synthetic" => EnvChoice::Synthetic,
            "frozenlake4" => EnvChoice::FrozenLake4,
            "frozenlake8" => EnvChoice::FrozenLake8,
            "taxi" => EnvChoice::Taxi,
            other => return Err(Error::Config(format!("unknown env {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub branching: usize,
    pub depth: usize,
    pub sigma: f64,
    pub slip: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            branching: 4,
            depth: 2,
            sigma: 0.5,
            slip: 0.2,
        }
    }
}

impl TreeParams {
    pub fn build(&self, seed: u64) -> Result<SyntheticTree> {
        SyntheticTree::new(SyntheticTreeSpec::new(
            self.branching,
            self.depth,
            self.sigma,
            self.slip,
            seed,
        ))
    }
}

/// Distribution of a probe reward in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmDist {
    Bernoulli(f64),
    Constant(f64),
}

impl ArmDist {
    pub fn mean(self) -> f64 {
        match self {
            ArmDist::Bernoulli(m) | ArmDist::Constant(m) => m,
        }
    }
}

impl FromStr for ArmDist {
    type Err = Error;

    /// `bernoulli:0.9` or `constant:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "distribution {s:?}: expected bernoulli:<mean> or constant:<mean>"
            ))
        };
        let (kind, mean) = s.split_once(':').ok_or_else(bad)?;
        let mean: f64 = mean.trim().parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&mean) {
            return Err(Error::Config(format!(
                "distribution {s:?}: mean must lie in [0, 1]"
            )));
        }
        match kind.trim() {
            "bernoulli" => Ok(ArmDist::Bernoulli(mean)),
            "constant" => Ok(ArmDist::Constant(mean)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Bandit,
    Lemma,
}

/// Settings of the concentration probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    pub arms: Vec<ArmDist>,
    pub eps: Vec<f64>,
    /// Reward of the Q-node in the Lemma probe.
    pub reward: ArmDist,
    pub child_probs: Vec<f64>,
    pub child_values: Vec<f64>,
    pub gamma: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kind: ProbeKind::Bandit,
            arms: vec![ArmDist::Bernoulli(0.9), ArmDist::Bernoulli(0.6)],
            eps: vec![0.1],
            reward: ArmDist::Bernoulli(0.5),
            child_probs: vec![0.5, 0.3, 0.2],
            child_values: vec![0.2, 0.5, 0.8],
            gamma: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SyntheticConvergence,
    ControlEvaluation,
    ConcentrationProbe,
    GridSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub env: EnvChoice,
    pub tree: TreeParams,
    /// Synthetic trials per tree; trial `i` uses tree `i / runs_per_tree`.
    pub runs_per_tree: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub budgets: Vec<u64>,
    pub seed: u64,
    /// Synthetic trials, control evaluation runs or probe replications.
    pub trials: usize,
    /// Planner depth for grid worlds; synthetic trees plan to their depth.
    pub horizon: usize,
    pub rollout_cap: usize,
    pub trajectory_mode: TrajectoryMode,
    pub beta_h: f64,
    pub candidates: Vec<f64>,
    pub probe: ProbeConfig,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, env: EnvChoice) -> Self {
        Self {
            kind,
            env,
            tree: TreeParams::default(),
            runs_per_tree: 5,
            algorithms: vec![AlgorithmSpec::spuct(2.0, 1.0)],
            budgets: vec![128, 256, 512, 1024],
            seed: 0,
            trials: 25,
            horizon: 50,
            rollout_cap: 100,
            trajectory_mode: TrajectoryMode::TruncateAtLeaf,
            beta_h: 120.0,
            candidates: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            probe: ProbeConfig::default(),
            workers: 1,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.budgets.is_empty() || self.budgets[0] == 0 {
            return bad("budgets must be positive".into());
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "budgets must be strictly increasing, got {:?}",
                self.budgets
            ));
        }
        if self.kind != ExperimentKind::ConcentrationProbe && self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.kind == ExperimentKind::GridSearch && self.candidates.is_empty() {
            return bad("grid search needs at least one candidate C".into());
        }
        if self.runs_per_tree < 1 || self.workers < 1 || self.horizon < 1 {
            return bad("runs_per_tree, workers and horizon must be at least 1".into());
        }
        Ok(())
    }

    /// Builds a config from merged `key = value` settings. Unknown keys are
    /// rejected.
    pub fn from_settings(kind: ExperimentKind, settings: &Settings) -> Result<Self> {
        let env = match settings.get("env") {
            Some(e) => e.parse()?,
            None if kind == ExperimentKind::ControlEvaluation => EnvChoice::FrozenLake4,
            None => EnvChoice::Synthetic,
        };
        let mut cfg = Self::new(kind, env);
        let p: f64 = settings.parse_or("p", 2.0)?;
        let c: f64 = settings.parse_or("C", 1.0)?;
        let bonus: BonusKind = settings.parse_or("bonus", BonusKind::FixedPolynomial)?;
        let mut algos = Vec::new();
        let default_algos = format!("spuct:{p}");
        for a in settings.get("algos").unwrap_or(&default_algos).split(',') {
            algos.push(AlgorithmSpec::parse(a.trim(), p, c, bonus)?);
        }
        cfg.algorithms = algos;
        cfg.seed = settings.parse_or("seed", cfg.seed)?;
        cfg.trials = settings.parse_or("trials", cfg.trials)?;
        cfg.trials = settings.parse_or("eval_runs", cfg.trials)?;
        if let Some(s) = settings.get("sims") {
            cfg.budgets = parse_list(s, "sims")?;
        }
        cfg.tree = TreeParams {
            branching: settings.parse_or("k", cfg.tree.branching)?,
            depth: settings.parse_or("depth", cfg.tree.depth)?,
            sigma: settings.parse_or("sigma", cfg.tree.sigma)?,
            slip: settings.parse_or("slip", cfg.tree.slip)?,
        };
        cfg.runs_per_tree = settings.parse_or("runs_per_tree", cfg.runs_per_tree)?;
        cfg.horizon = settings.parse_or("horizon", cfg.horizon)?;
        cfg.rollout_cap = settings.parse_or("rollout_cap", cfg.rollout_cap)?;
        cfg.trajectory_mode = match settings.get("mode").map(String::as_str) {
            None | Some("truncate") => TrajectoryMode::TruncateAtLeaf,
            Some("full") => TrajectoryMode::FullHorizon,
            Some(other) => {
                return Err(Error::Config(format!(
                    "mode {other:?}: expected truncate or full"
                )))
            }
        };
        cfg.beta_h = settings.parse_or("beta_h", cfg.beta_h)?;
        if let Some(s) = settings.get("candidates") {
            cfg.candidates = parse_list(s, "candidates")?;
        }
        cfg.workers = settings.parse_or("workers", cfg.workers)?;
        cfg.out = settings.get("out").map(PathBuf::from);

        let probe = &mut cfg.probe;
        probe.kind = match settings.get("probe").map(String::as_str) {
            None | Some("bandit") => ProbeKind::Bandit,
            Some("lemma") => ProbeKind::Lemma,
            Some(other) => {
                return Err(Error::Config(format!(
                    "probe {other:?}: expected bandit or lemma"
                )))
            }
        };
        if let Some(s) = settings.get("arms") {
            probe.arms = parse_list(s, "arms")?;
        }
        if let Some(s) = settings.get("eps") {
            probe.eps = parse_list(s, "eps")?;
        }
        probe.reward = settings.parse_or("reward", probe.reward)?;
        if let Some(s) = settings.get("child_probs") {
            probe.child_probs = parse_list(s, "child_probs")?;
        }
        if let Some(s) = settings.get("child_values") {
            probe.child_values = parse_list(s, "child_values")?;
        }
        probe.gamma = settings.parse_or("gamma", probe.gamma)?;

        cfg.validate()?;
        Ok(cfg)
    }
}

pub const KEYS: &[&str] = &[
    "env",
    "p",
    "C",
    "bonus",
    "algos",
    "seed",
    "trials",
    "eval_runs",
    "sims",
    "k",
    "depth",
    "sigma",
    "slip",
    "runs_per_tree",
    "horizon",
    "rollout_cap",
    "mode",
    "beta_h",
    "candidates",
    "workers",
    "out",
    "probe",
    "arms",
    "eps",
    "reward",
    "child_probs",
    "child_values",
    "gamma",
];

/// Flat `key = value` settings. Later insertions override earlier ones, so
/// CLI flags are merged on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    /// Parses lines of `key = value`; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.map.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&String> {
        self.map.get(key)
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key} = {v:?} is not a valid value"))),
        }
    }
}

fn parse_list<T: FromStr>(text: &str, key: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {:?}", x.trim())))
        })
        .collect()
}
