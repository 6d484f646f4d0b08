//! Generative-model MDPs, the built-in environments, and exact solvers.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;

use crate::error::{invalid, Error, Result};

mod grid;
mod synthetic;

pub use grid::{
    Cell, Direction, GoalReward, GridEnvSpec, GridState, GridWorld, Layout, RelativeMove,
};
pub use synthetic::{SyntheticTree, SyntheticTreeSpec, TreeNode};

/// One sampled step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    pub reward: f64,
    pub terminal: bool,
}

/// One enumerated outcome of a state-action pair. `reward` is the expected
/// reward of that outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<S> {
    pub next: S,
    pub prob: f64,
    pub reward: f64,
    pub terminal: bool,
}

/// A black-box stochastic MDP that can be sampled from any state.
///
/// States double as their own canonical keys: two arrivals at equal states
/// share statistics in a search tree.
pub trait GenerativeModel: Send + Sync {
    type State: Clone + Eq + Hash + Debug + Send + Sync;

    fn name(&self) -> String;

    fn initial_state(&self) -> Self::State;

    fn action_count(&self, state: &Self::State) -> usize;

    fn is_terminal(&self, state: &Self::State) -> bool;

    fn sample<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Transition<Self::State>;

    /// Every sampled reward lies in `[lo, hi]`.
    fn reward_bounds(&self) -> (f64, f64);

    /// Discount the environment is evaluated with.
    fn discount(&self) -> f64;

    /// Maximum number of real steps in one evaluation episode.
    fn step_cap(&self) -> usize;

    /// Lower bound on any discounted return collected over at most
    /// `max_steps` steps. Zero whenever rewards are nonnegative.
    fn return_floor(&self, gamma: f64, max_steps: usize) -> f64 {
        let (lo, _) = self.reward_bounds();
        if lo >= 0.0 {
            0.0
        } else if gamma < 1.0 {
            lo / (1.0 - gamma)
        } else {
            lo * max_steps as f64
        }
    }

    /// Full transition distribution, if the model can enumerate it.
    fn outcomes(&self, _state: &Self::State, _action: usize) -> Option<Vec<Outcome<Self::State>>> {
        None
    }
}

/// Outcome lists indexed by action.
type PerAction<S> = Vec<Vec<Outcome<S>>>;

fn outcomes_or_unsupported<M: GenerativeModel>(
    model: &M,
    state: &M::State,
    action: usize,
) -> Result<Vec<Outcome<M::State>>> {
    model.outcomes(state, action).ok_or_else(|| {
        Error::Unsupported(format!("{} does not enumerate its dynamics", model.name()))
    })
}

/// Expected discounted return of the uniform-random playout policy run for
/// at most `steps` steps from `state`.
pub fn uniform_playout_value<M: GenerativeModel>(
    model: &M,
    state: &M::State,
    gamma: f64,
    steps: usize,
) -> Result<f64> {
    let mut memo = HashMap::new();
    playout_value(model, state, gamma, steps, &mut memo)
}

fn playout_value<M: GenerativeModel>(
    model: &M,
    state: &M::State,
    gamma: f64,
    steps: usize,
    memo: &mut HashMap<(M::State, usize), f64>,
) -> Result<f64> {
    if steps == 0 || model.is_terminal(state) {
        return Ok(0.0);
    }
    if let Some(&v) = memo.get(&(state.clone(), steps)) {
        return Ok(v);
    }
    let k = model.action_count(state);
    let mut total = 0.0;
    for a in 0..k {
        for o in outcomes_or_unsupported(model, state, a)? {
            let tail = if o.terminal {
                0.0
            } else {
                playout_value(model, &o.next, gamma, steps - 1, memo)?
            };
            total += o.prob * (o.reward + gamma * tail);
        }
    }
    let v = total / k as f64;
    memo.insert((state.clone(), steps), v);
    Ok(v)
}

/// Depth-limited optimal value of the initial state by backward induction.
///
/// Nodes at depth `horizon` are valued by the expected uniform-random playout
/// of `playout_steps` steps (zero when `playout_steps == 0`); terminal states
/// are worth zero.
pub fn exact_root_value<M: GenerativeModel>(
    model: &M,
    gamma: f64,
    horizon: usize,
    playout_steps: usize,
) -> Result<f64> {
    exact_value(model, &model.initial_state(), gamma, horizon, playout_steps)
}

/// As [`exact_root_value`], from an arbitrary state.
pub fn exact_value<M: GenerativeModel>(
    model: &M,
    state: &M::State,
    gamma: f64,
    horizon: usize,
    playout_steps: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return invalid(format!("discount must lie in [0, 1], got {gamma}"));
    }
    if model.is_terminal(state) {
        return Ok(0.0);
    }

    // states reachable at each depth, deduplicated per level
    let mut levels: Vec<Vec<M::State>> = vec![vec![state.clone()]];
    let mut transitions: HashMap<M::State, PerAction<M::State>> = HashMap::new();
    for depth in 0..horizon {
        let mut seen = HashMap::new();
        let mut next_level = Vec::new();
        for s in &levels[depth] {
            if !transitions.contains_key(s) {
                let per_action = (0..model.action_count(s))
                    .map(|a| outcomes_or_unsupported(model, s, a))
                    .collect::<Result<Vec<_>>>()?;
                transitions.insert(s.clone(), per_action);
            }
            for outs in &transitions[s] {
                for o in outs {
                    if !o.terminal && seen.insert(o.next.clone(), ()).is_none() {
                        next_level.push(o.next.clone());
                    }
                }
            }
        }
        levels.push(next_level);
    }

    let mut playout_memo = HashMap::new();
    let mut below: HashMap<M::State, f64> = HashMap::new();
    for s in &levels[horizon] {
        let v = playout_value(model, s, gamma, playout_steps, &mut playout_memo)?;
        below.insert(s.clone(), v);
    }
    for depth in (0..horizon).rev() {
        let mut here = HashMap::with_capacity(levels[depth].len());
        for s in &levels[depth] {
            let best = transitions[s]
                .iter()
                .map(|outs| {
                    outs.iter()
                        .map(|o| {
                            let tail = if o.terminal { 0.0 } else { below[&o.next] };
                            o.prob * (o.reward + gamma * tail)
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            here.insert(s.clone(), best);
        }
        below = here;
    }
    Ok(below[state])
}

/// Checks that every enumerated distribution reachable within `depth` steps
/// sums to one. Returns the largest deviation seen.
pub fn max_probability_defect<M: GenerativeModel>(model: &M, depth: usize) -> Result<f64> {
    let mut frontier = vec![model.initial_state()];
    let mut visited = HashMap::new();
    let mut worst: f64 = 0.0;
    for _ in 0..=depth {
        let mut next = Vec::new();
        for s in frontier {
            if model.is_terminal(&s) || visited.insert(s.clone(), ()).is_some() {
                continue;
            }
            for a in 0..model.action_count(&s) {
                let outs = outcomes_or_unsupported(model, &s, a)?;
                let total: f64 = outs.iter().map(|o| o.prob).sum();
                worst = worst.max((total - 1.0).abs());
                next.extend(outs.into_iter().map(|o| o.next));
            }
        }
        frontier = next;
    }
    Ok(worst)
}
