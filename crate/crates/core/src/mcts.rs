//! Monte-Carlo tree search with power-mean value backups.
//!
//! One search tree alternates value nodes (states) and Q-nodes (state-action
//! pairs). Every trajectory descends by maximising `Q̂ + bonus`, samples the
//! generative model, and on the way back up updates
//!
//! * `Q̂(s, a)` as the running mean of `r + γ·V̂(s')`,
//! * `V̂(s)` as the power mean of order `p` of the children's `Q̂`, weighted
//!   by visit counts.
//!
//! With `p = 1` the value backup is the visit-weighted average
//! (Fixed-Depth-MCTS when paired with the polynomial bonus, UCT when paired
//! with the logarithmic one); larger `p` moves it toward the maximum.

use std::fmt::Write as _;

use rand::Rng;

use crate::envs::GenerativeModel;
use crate::error::{invalid, Result};
use crate::estimators::{power_mean, weighted_mean, RunningMean};
use crate::schedule::BonusSchedule;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajectoryMode {
    /// Stop at the first unexpanded node and evaluate it with a playout.
    #[default]
    TruncateAtLeaf,
    /// Always descend to depth `H` (or a terminal state); playouts only run
    /// at depth `H`.
    FullHorizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    /// Power-mean order of the value backup, `p ≥ 1`.
    pub p: f64,
    pub schedule: BonusSchedule,
    pub horizon: usize,
    pub gamma: f64,
    /// Maximum number of steps in one playout.
    pub rollout_depth_cap: usize,
    pub trajectory_mode: TrajectoryMode,
}

impl AlgorithmConfig {
    pub fn new(p: f64, schedule: BonusSchedule, gamma: f64) -> Result<Self> {
        let cfg = Self {
            p,
            horizon: schedule.horizon(),
            schedule,
            gamma,
            rollout_depth_cap: 100,
            trajectory_mode: TrajectoryMode::TruncateAtLeaf,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rollout_cap(mut self, cap: usize) -> Self {
        self.rollout_depth_cap = cap;
        self
    }

    pub fn with_mode(mut self, mode: TrajectoryMode) -> Self {
        self.trajectory_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return invalid(format!("p must be finite and >= 1, got {}", self.p));
        }
        if self.horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        if self.schedule.horizon() != self.horizon {
            return invalid(format!(
                "schedule covers horizon {} but the planner uses {}",
                self.schedule.horizon(),
                self.horizon
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return invalid(format!("discount must lie in [0, 1], got {}", self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct QNode {
    q: RunningMean,
    children: Vec<ChildEdge>,
}

impl QNode {
    pub fn q(&self) -> f64 {
        self.q.mean()
    }

    pub fn visits(&self) -> u64 {
        self.q.count()
    }

    pub fn children(&self) -> &[ChildEdge] {
        &self.children
    }
}

/// Arrival statistics for one successor state of a Q-node.
#[derive(Debug, Clone, Copy)]
pub struct ChildEdge {
    pub node: NodeId,
    pub visits: u64,
}

#[derive(Debug, Clone)]
pub struct VNode<S> {
    state: S,
    depth: usize,
    terminal: bool,
    visits: u64,
    value: f64,
    expanded: bool,
    actions: Vec<QNode>,
    leaf: RunningMean,
}

impl<S> VNode<S> {
    fn new(state: S, depth: usize, terminal: bool) -> Self {
        Self {
            state,
            depth,
            terminal,
            visits: 0,
            value: 0.0,
            expanded: false,
            actions: Vec::new(),
            leaf: RunningMean::new(),
        }
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn visits(&self) -> u64 {
        self.visits
    }

    /// Power-mean value estimate; zero until the node has been visited.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    pub fn actions(&self) -> &[QNode] {
        &self.actions
    }

    /// Average of the playouts run from this node while it was a leaf.
    pub fn playout_mean(&self) -> RunningMean {
        self.leaf
    }
}

/// One Q-value update performed during a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QUpdate {
    pub node: NodeId,
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub q_values: Vec<f64>,
    pub counts: Vec<u64>,
    pub tree_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub best_action: usize,
    pub root_value: f64,
    pub diagnostics: Diagnostics,
}

/// Search tree rooted at one state of a model.
pub struct SearchTree<'m, M: GenerativeModel> {
    model: &'m M,
    cfg: AlgorithmConfig,
    nodes: Vec<VNode<M::State>>,
    /// Returns are shifted up by `-floor` before a power-mean backup so the
    /// backup only ever sees nonnegative values.
    floor: f64,
    scratch_values: Vec<f64>,
    scratch_counts: Vec<u64>,
}

impl<'m, M: GenerativeModel> SearchTree<'m, M> {
    pub fn new(model: &'m M, root: M::State, cfg: AlgorithmConfig) -> Result<Self> {
        cfg.validate()?;
        if model.is_terminal(&root) {
            return invalid("cannot plan from a terminal state");
        }
        let floor = if cfg.p == 1.0 {
            0.0
        } else {
            model
                .return_floor(cfg.gamma, cfg.horizon + cfg.rollout_depth_cap)
                .min(0.0)
        };
        let mut tree = Self {
            model,
            cfg,
            nodes: vec![VNode::new(root, 0, false)],
            floor,
            scratch_values: Vec::new(),
            scratch_counts: Vec::new(),
        };
        tree.expand(0);
        Ok(tree)
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[VNode<M::State>] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &VNode<M::State> {
        &self.nodes[id]
    }

    pub fn root(&self) -> &VNode<M::State> {
        &self.nodes[0]
    }

    pub fn root_value(&self) -> f64 {
        self.nodes[0].value
    }

    /// Shift applied before power-mean backups (zero for `p = 1` and for
    /// models with nonnegative rewards).
    pub fn value_floor(&self) -> f64 {
        self.floor
    }

    /// Greedy root action: highest `Q̂`, lowest index on ties.
    pub fn best_action(&self) -> usize {
        self.select_action(0, true)
    }

    pub fn run_trajectory<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.simulate_v(0, rng, &mut None)
    }

    /// As [`SearchTree::run_trajectory`], appending every Q-value update to
    /// `trace` in the order it was applied.
    pub fn run_trajectory_traced<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        trace: &mut Vec<QUpdate>,
    ) -> Result<()> {
        self.simulate_v(0, rng, &mut Some(trace))
    }

    /// Index of the action maximising `Q̂ + bonus` (or `Q̂` alone when
    /// `greedy`). An untried action carries an infinite bonus. Ties go to the
    /// lowest index.
    pub fn select_action(&self, id: NodeId, greedy: bool) -> usize {
        let node = &self.nodes[id];
        assert!(node.expanded, "action selection on an unexpanded node");
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (a, q) in node.actions.iter().enumerate() {
            let score = if greedy {
                q.q.mean()
            } else {
                q.q.mean()
                    + self
                        .cfg
                        .schedule
                        .bonus_unchecked(node.depth, node.visits, q.q.count())
            };
            if score > best_score {
                best = a;
                best_score = score;
            }
        }
        best
    }

    fn expand(&mut self, id: NodeId) {
        let node = &mut self.nodes[id];
        let k = self.model.action_count(&node.state);
        node.actions = vec![QNode::default(); k];
        node.expanded = true;
    }

    fn simulate_v<R: Rng + ?Sized>(
        &mut self,
        id: NodeId,
        rng: &mut R,
        trace: &mut Option<&mut Vec<QUpdate>>,
    ) -> Result<()> {
        if self.nodes[id].actions.is_empty() {
            return invalid("non-terminal state without actions");
        }
        let action = self.select_action(id, false);
        self.simulate_q(id, action, rng, trace)?;
        self.nodes[id].visits += 1;
        self.nodes[id].value = self.backup(id)?;
        Ok(())
    }

    fn simulate_q<R: Rng + ?Sized>(
        &mut self,
        id: NodeId,
        action: usize,
        rng: &mut R,
        trace: &mut Option<&mut Vec<QUpdate>>,
    ) -> Result<()> {
        let depth = self.nodes[id].depth;
        let step = self.model.sample(&self.nodes[id].state, action, rng);
        let (edge, child) = self.child_for(id, action, step.next, step.terminal, depth + 1);

        let next_value = if step.terminal {
            0.0
        } else if depth + 1 >= self.cfg.horizon {
            self.evaluate_leaf(child, rng)?
        } else if !self.nodes[child].expanded {
            self.expand(child);
            match self.cfg.trajectory_mode {
                TrajectoryMode::TruncateAtLeaf => self.evaluate_leaf(child, rng)?,
                TrajectoryMode::FullHorizon => {
                    self.simulate_v(child, rng, trace)?;
                    self.nodes[child].value
                }
            }
        } else {
            self.simulate_v(child, rng, trace)?;
            self.nodes[child].value
        };

        let target = step.reward + self.cfg.gamma * next_value;
        let q = &mut self.nodes[id].actions[action];
        q.q.push(target)?;
        q.children[edge].visits += 1;
        if let Some(trace) = trace {
            trace.push(QUpdate {
                node: id,
                action,
                target,
            });
        }
        Ok(())
    }

    /// Finds or creates the child node for `state` under `(id, action)`.
    fn child_for(
        &mut self,
        id: NodeId,
        action: usize,
        state: M::State,
        terminal: bool,
        depth: usize,
    ) -> (usize, NodeId) {
        let found = self.nodes[id].actions[action]
            .children
            .iter()
            .position(|e| self.nodes[e.node].state == state);
        match found {
            Some(edge) => (edge, self.nodes[id].actions[action].children[edge].node),
            None => {
                let child = self.nodes.len();
                self.nodes.push(VNode::new(state, depth, terminal));
                let children = &mut self.nodes[id].actions[action].children;
                children.push(ChildEdge {
                    node: child,
                    visits: 0,
                });
                (children.len() - 1, child)
            }
        }
    }

    fn evaluate_leaf<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Result<f64> {
        let ret = rollout(self.model, &self.nodes[id].state, &self.cfg, rng);
        let leaf = &mut self.nodes[id].leaf;
        leaf.push(ret)?;
        Ok(leaf.mean())
    }

    fn backup(&mut self, id: NodeId) -> Result<f64> {
        let node = &self.nodes[id];
        self.scratch_values.clear();
        self.scratch_counts.clear();
        for q in &node.actions {
            self.scratch_values.push(q.q.mean());
            self.scratch_counts.push(q.q.count());
        }
        if self.cfg.p == 1.0 {
            return Ok(weighted_mean(&self.scratch_values, &self.scratch_counts));
        }
        let floor = self.floor;
        for v in &mut self.scratch_values {
            *v = (*v - floor).max(0.0);
        }
        Ok(power_mean(&self.scratch_values, &self.scratch_counts, self.cfg.p)? + floor)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let root = &self.nodes[0];
        Diagnostics {
            q_values: root.actions.iter().map(|q| q.q.mean()).collect(),
            counts: root.actions.iter().map(|q| q.q.count()).collect(),
            tree_size: self.nodes.len(),
        }
    }

    /// Indented text dump: value nodes as `state depth T V`, Q-nodes as
    /// `a<i> T Q`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, id: NodeId, indent: usize, out: &mut String) {
        let n = &self.nodes[id];
        let pad = "  ".repeat(indent);
        let _ = writeln!(
            out,
            "{pad}{:?} depth={} T={} V={}{}",
            n.state,
            n.depth,
            n.visits,
            n.value,
            if n.terminal { " terminal" } else { "" }
        );
        for (a, q) in n.actions.iter().enumerate() {
            let _ = writeln!(out, "{pad}  a{a} T={} Q={}", q.q.count(), q.q.mean());
            for e in &q.children {
                self.dump_node(e.node, indent + 2, out);
            }
        }
    }
}

/// Uniform-random playout from `state`: the discounted reward sum over at
/// most `cfg.rollout_depth_cap` steps, stopping early at a terminal state.
pub fn rollout<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    state: &M::State,
    cfg: &AlgorithmConfig,
    rng: &mut R,
) -> f64 {
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut current = state.clone();
    for _ in 0..cfg.rollout_depth_cap {
        let k = model.action_count(&current);
        if k == 0 || model.is_terminal(&current) {
            break;
        }
        let step = model.sample(&current, rng.random_range(0..k), rng);
        ret += discount * step.reward;
        if step.terminal {
            break;
        }
        discount *= cfg.gamma;
        current = step.next;
    }
    ret
}

/// Runs `n` trajectories from the model's initial state.
pub fn plan<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    cfg: &AlgorithmConfig,
    n: u64,
    rng: &mut R,
) -> Result<PlanResult> {
    plan_from(model, model.initial_state(), cfg, n, rng)
}

/// Runs `n` trajectories from `state` in a fresh tree and reports the greedy
/// action and the root value estimate.
pub fn plan_from<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    state: M::State,
    cfg: &AlgorithmConfig,
    n: u64,
    rng: &mut R,
) -> Result<PlanResult> {
    if n < 1 {
        return invalid("at least one simulation is required");
    }
    let mut tree = SearchTree::new(model, state, cfg.clone())?;
    for _ in 0..n {
        tree.run_trajectory(rng)?;
    }
    Ok(PlanResult {
        best_action: tree.best_action(),
        root_value: tree.root_value(),
        diagnostics: tree.diagnostics(),
    })
}
