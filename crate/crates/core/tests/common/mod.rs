//! Independent oracles and tree checkers shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

use power_uct::envs::{GenerativeModel, SyntheticTree, TreeNode};
use power_uct::estimators::{power_mean, weighted_mean};
use power_uct::mcts::{QUpdate, SearchTree};

/// Optimal root value by enumerating every deterministic policy (one action
/// per internal node) and averaging leaf means over the slip paths.
pub fn brute_force_tree_value(tree: &SyntheticTree) -> f64 {
    let spec = tree.spec();
    let (k, d) = (spec.branching, spec.depth);
    let internal: usize = (0..d).map(|l| k.pow(l as u32)).sum();
    let policies = k.pow(internal as u32);
    let prob = |intended: usize, which: usize| {
        if which == intended {
            1.0 - spec.slip
        } else {
            spec.slip / (k - 1) as f64
        }
    };
    let mut best = f64::NEG_INFINITY;
    for code in 0..policies {
        // internal nodes are numbered breadth first
        let action_of = |level: usize, index: usize| -> usize {
            let slot = (0..level).map(|l| k.pow(l as u32)).sum::<usize>() + index;
            (code / k.pow(slot as u32)) % k
        };
        let mut value = 0.0;
        for leaf in 0..k.pow(d as u32) {
            let mut p = 1.0;
            let mut index = 0;
            for level in 0..d {
                let which = (leaf / k.pow((d - 1 - level) as u32)) % k;
                p *= prob(action_of(level, index), which);
                index = index * k + which;
            }
            value += p * tree.leaf_means()[leaf];
        }
        best = best.max(value);
    }
    best
}

/// Infinite-horizon optimal value of the start cell of a FrozenLake map by
/// value iteration. Holes and the goal absorb; entering the goal pays 1.
pub fn frozenlake_value_iteration(map: &[&str], gamma: f64) -> f64 {
    let h = map.len() as i64;
    let w = map[0].len() as i64;
    let cell = |r: i64, c: i64| map[r as usize].as_bytes()[c as usize];
    let n = (h * w) as usize;
    // left, down, right, up
    let moves = [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)];
    let step = |s: usize, m: usize| -> usize {
        let (r, c) = ((s as i64) / w, (s as i64) % w);
        let (nr, nc) = (r + moves[m].0, c + moves[m].1);
        if nr < 0 || nr >= h || nc < 0 || nc >= w {
            s
        } else {
            (nr * w + nc) as usize
        }
    };
    let absorbing = |s: usize| matches!(cell(s as i64 / w, s as i64 % w), b'H' | b'G');
    let mut v = vec![0.0f64; n];
    loop {
        let mut delta = 0.0f64;
        for s in 0..n {
            if absorbing(s) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..4 {
                let mut q = 0.0;
                for m in [(a + 3) % 4, a, (a + 1) % 4] {
                    let t = step(s, m);
                    let goal = cell(t as i64 / w, t as i64 % w) == b'G';
                    q += (if goal { 1.0 } else { 0.0 } + gamma * v[t]) / 3.0;
                }
                best = best.max(q);
            }
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-15 {
            break;
        }
    }
    let start = map.concat().find('S').unwrap();
    v[start]
}

pub const FROZENLAKE4: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];

/// Checks the structural invariants of a search tree against the full trace
/// of Q-updates that built it. Returns a description of the first failure.
pub fn check_tree<M: GenerativeModel>(
    tree: &SearchTree<'_, M>,
    trace: &[QUpdate],
) -> Result<(), String> {
    let p = tree.config().p;
    let floor = tree.value_floor();
    let nodes = tree.nodes();

    // replay every update as an independent running mean
    let mut replay: HashMap<(usize, usize), (f64, u64)> = HashMap::new();
    for u in trace {
        let e = replay.entry((u.node, u.action)).or_insert((0.0, 0));
        e.0 += (u.target - e.0) / (e.1 + 1) as f64;
        e.1 += 1;
    }

    let mut arrivals = vec![0u64; nodes.len()];
    for (id, node) in nodes.iter().enumerate() {
        let actions = node.actions();
        let t_sum: u64 = actions.iter().map(|q| q.visits()).sum();
        if node.is_expanded() && !actions.is_empty() && t_sum != node.visits() {
            return Err(format!(
                "node {id}: sum of action counts {t_sum} != visits {}",
                node.visits()
            ));
        }
        for (a, q) in actions.iter().enumerate() {
            let c_sum: u64 = q.children().iter().map(|e| e.visits).sum();
            if c_sum != q.visits() {
                return Err(format!(
                    "node {id} action {a}: child arrivals {c_sum} != {}",
                    q.visits()
                ));
            }
            for e in q.children() {
                arrivals[e.node] += e.visits;
            }
            let (mean, count) = replay.get(&(id, a)).copied().unwrap_or((0.0, 0));
            if count != q.visits() || (mean - q.q()).abs() > 1e-10 {
                return Err(format!(
                    "node {id} action {a}: replay ({mean}, {count}) vs ({}, {})",
                    q.q(),
                    q.visits()
                ));
            }
        }
        if node.visits() > 0 {
            let values: Vec<f64> = actions.iter().map(|q| q.q()).collect();
            let counts: Vec<u64> = actions.iter().map(|q| q.visits()).collect();
            let expected = if p == 1.0 {
                weighted_mean(&values, &counts)
            } else {
                let shifted: Vec<f64> = values.iter().map(|v| (v - floor).max(0.0)).collect();
                power_mean(&shifted, &counts, p).map_err(|e| e.to_string())? + floor
            };
            if (expected - node.value()).abs() > 1e-10 {
                return Err(format!(
                    "node {id}: value {} != power mean {expected}",
                    node.value()
                ));
            }
        }
    }
    // every arrival at a non-terminal child is either a visit or a playout
    for (id, node) in nodes.iter().enumerate().skip(1) {
        if node.is_terminal() {
            continue;
        }
        let used = node.visits() + node.playout_mean().count();
        if used != arrivals[id] {
            return Err(format!(
                "node {id}: {} arrivals but {used} visits and playouts",
                arrivals[id]
            ));
        }
    }
    Ok(())
}

/// Arithmetic-mean backup planner with the fixed polynomial bonus, written
/// independently of the library's search tree. It draws random numbers in
/// the same order, so with the same stream it must reproduce the library's
/// `p = 1` planner exactly.
pub struct MeanPlanner<'a> {
    model: &'a SyntheticTree,
    c: f64,
    horizon: usize,
    rollout_cap: usize,
    nodes: Vec<RefNode>,
    /// `(action, target)` of every Q update, in application order.
    pub updates: Vec<(usize, f64)>,
}

struct RefNode {
    state: TreeNode,
    depth: usize,
    visits: u64,
    value: f64,
    expanded: bool,
    q: Vec<(f64, u64)>,
    kids: Vec<Vec<(usize, u64)>>,
    leaf: (f64, u64),
}

impl RefNode {
    fn new(state: TreeNode, depth: usize) -> Self {
        Self {
            state,
            depth,
            visits: 0,
            value: 0.0,
            expanded: false,
            q: vec![],
            kids: vec![],
            leaf: (0.0, 0),
        }
    }
}

impl<'a> MeanPlanner<'a> {
    pub fn new(model: &'a SyntheticTree, c: f64, horizon: usize, rollout_cap: usize) -> Self {
        let mut me = Self {
            model,
            c,
            horizon,
            rollout_cap,
            nodes: vec![RefNode::new(model.initial_state(), 0)],
            updates: vec![],
        };
        me.expand(0);
        me
    }

    pub fn root_value(&self) -> f64 {
        self.nodes[0].value
    }

    fn expand(&mut self, id: usize) {
        let k = self.model.action_count(&self.nodes[id].state);
        self.nodes[id].q = vec![(0.0, 0); k];
        self.nodes[id].kids = vec![vec![]; k];
        self.nodes[id].expanded = true;
    }

    fn pick(&self, id: usize) -> usize {
        let node = &self.nodes[id];
        let n = node.visits as f64;
        let mut best = (0, f64::NEG_INFINITY);
        for (a, &(q, t)) in node.q.iter().enumerate() {
            let bonus = if t == 0 {
                f64::INFINITY
            } else {
                self.c * n.powf(0.25) / (t as f64).sqrt()
            };
            if q + bonus > best.1 {
                best = (a, q + bonus);
            }
        }
        best.0
    }

    fn playout<R: Rng>(&self, from: TreeNode, rng: &mut R) -> f64 {
        let (mut ret, mut disc, mut s) = (0.0, 1.0, from);
        for _ in 0..self.rollout_cap {
            let k = self.model.action_count(&s);
            if k == 0 || self.model.is_terminal(&s) {
                break;
            }
            let t = self.model.sample(&s, rng.random_range(0..k), rng);
            ret += disc * t.reward;
            if t.terminal {
                break;
            }
            disc *= self.model.discount();
            s = t.next;
        }
        ret
    }

    fn leaf_value<R: Rng>(&mut self, id: usize, rng: &mut R) -> f64 {
        let ret = self.playout(self.nodes[id].state, rng);
        let (m, n) = self.nodes[id].leaf;
        let m = (m * n as f64 + ret) / (n as f64 + 1.0);
        self.nodes[id].leaf = (m, n + 1);
        m
    }

    pub fn trajectory<R: Rng>(&mut self, rng: &mut R) {
        self.visit(0, rng);
    }

    fn visit<R: Rng>(&mut self, id: usize, rng: &mut R) {
        let a = self.pick(id);
        let depth = self.nodes[id].depth;
        let t = self.model.sample(&self.nodes[id].state, a, rng);
        let edge = self.nodes[id].kids[a]
            .iter()
            .position(|&(c, _)| self.nodes[c].state == t.next);
        let edge = match edge {
            Some(e) => e,
            None => {
                self.nodes.push(RefNode::new(t.next, depth + 1));
                let child = self.nodes.len() - 1;
                self.nodes[id].kids[a].push((child, 0));
                self.nodes[id].kids[a].len() - 1
            }
        };
        let child = self.nodes[id].kids[a][edge].0;
        let v = if t.terminal {
            0.0
        } else if depth + 1 >= self.horizon {
            self.leaf_value(child, rng)
        } else if !self.nodes[child].expanded {
            self.expand(child);
            self.leaf_value(child, rng)
        } else {
            self.visit(child, rng);
            self.nodes[child].value
        };
        let target = t.reward + self.model.discount() * v;
        let (m, n) = self.nodes[id].q[a];
        self.nodes[id].q[a] = ((m * n as f64 + target) / (n as f64 + 1.0), n + 1);
        self.nodes[id].kids[a][edge].1 += 1;
        self.updates.push((a, target));

        let node = &mut self.nodes[id];
        node.visits += 1;
        let (mut sum, mut total) = (0.0, 0u64);
        for &(q, t) in &node.q {
            if t > 0 {
                sum += t as f64 * q;
                total += t;
            }
        }
        node.value = sum / total as f64;
    }
}
