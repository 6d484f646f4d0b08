use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{GenerativeModel, Outcome, Transition};
use crate::error::{invalid, Result};

/// Leaf noise is clipped symmetrically at this many standard deviations, so
/// the mean is unchanged and rewards stay bounded.
const NOISE_CLIP_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTreeSpec {
    pub branching: usize,
    pub depth: usize,
    /// Standard deviation of the leaf reward.
    pub sigma: f64,
    /// Probability mass moved off the intended child, spread evenly.
    pub slip: f64,
    pub seed: u64,
}

impl SyntheticTreeSpec {
    pub fn new(branching: usize, depth: usize, sigma: f64, slip: f64, seed: u64) -> Self {
        Self {
            branching,
            depth,
            sigma,
            slip,
            seed,
        }
    }
}

/// A node of the synthetic tree: `index` counts nodes left to right within
/// `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeNode {
    pub level: u32,
    pub index: u64,
}

/// Complete `k`-ary tree of depth `d` with random edge values. Each leaf mean
/// is the sum of the edge values on its root path, min-max normalized to
/// `[0, 1]`. Entering a leaf pays a Gaussian reward around that mean and ends
/// the episode; every other step pays zero.
#[derive(Debug, Clone)]
pub struct SyntheticTree {
    spec: SyntheticTreeSpec,
    leaf_means: Vec<f64>,
}

impl SyntheticTree {
    pub fn new(spec: SyntheticTreeSpec) -> Result<Self> {
        if spec.branching < 2 {
            return invalid(format!(
                "branching factor must be >= 2, got {}",
                spec.branching
            ));
        }
        if spec.depth < 1 {
            return invalid("tree depth must be >= 1");
        }
        if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
            return invalid(format!("sigma must be finite and >= 0, got {}", spec.sigma));
        }
        if !(0.0..1.0).contains(&spec.slip) {
            return invalid(format!("slip must lie in [0, 1), got {}", spec.slip));
        }
        let leaves = (spec.branching as u64)
            .checked_pow(spec.depth as u32)
            .filter(|&n| n <= 1 << 26)
            .ok_or_else(|| crate::Error::InvalidArgument("synthetic tree too large".into()))?;

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut sums = vec![0.0f64];
        for _ in 0..spec.depth {
            let mut next = Vec::with_capacity(sums.len() * spec.branching);
            for &s in &sums {
                for _ in 0..spec.branching {
                    next.push(s + rng.random::<f64>());
                }
            }
            sums = next;
        }
        debug_assert_eq!(sums.len() as u64, leaves);

        let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let leaf_means = sums
            .into_iter()
            .map(|s| if span > 0.0 { (s - lo) / span } else { 0.0 })
            .collect();
        Ok(Self { spec, leaf_means })
    }

    pub fn spec(&self) -> &SyntheticTreeSpec {
        &self.spec
    }

    /// Normalized means, indexed by leaf position.
    pub fn leaf_means(&self) -> &[f64] {
        &self.leaf_means
    }

    pub fn leaf_mean(&self, node: TreeNode) -> Option<f64> {
        (node.level as usize == self.spec.depth).then(|| self.leaf_means[node.index as usize])
    }

    fn child(&self, node: TreeNode, which: usize) -> TreeNode {
        TreeNode {
            level: node.level + 1,
            index: node.index * self.spec.branching as u64 + which as u64,
        }
    }

    fn child_prob(&self, intended: usize, which: usize) -> f64 {
        if which == intended {
            1.0 - self.spec.slip
        } else {
            self.spec.slip / (self.spec.branching - 1) as f64
        }
    }

    fn arrive(&self, next: TreeNode, noise: f64) -> Transition<TreeNode> {
        match self.leaf_mean(next) {
            Some(mean) => Transition {
                next,
                reward: mean + self.spec.sigma * noise,
                terminal: true,
            },
            None => Transition {
                next,
                reward: 0.0,
                terminal: false,
            },
        }
    }
}

impl GenerativeModel for SyntheticTree {
    type State = TreeNode;

    fn name(&self) -> String {
        format!("synthetic-k{}-d{}", self.spec.branching, self.spec.depth)
    }

    fn initial_state(&self) -> TreeNode {
        TreeNode { level: 0, index: 0 }
    }

    fn action_count(&self, state: &TreeNode) -> usize {
        if self.is_terminal(state) {
            0
        } else {
            self.spec.branching
        }
    }

    fn is_terminal(&self, state: &TreeNode) -> bool {
        state.level as usize >= self.spec.depth
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        state: &TreeNode,
        action: usize,
        rng: &mut R,
    ) -> Transition<TreeNode> {
        let k = self.spec.branching;
        let which = if self.spec.slip > 0.0 && rng.random::<f64>() < self.spec.slip {
            // uniform over the k - 1 unintended children
            let other = rng.random_range(0..k - 1);
            if other >= action {
                other + 1
            } else {
                other
            }
        } else {
            action
        };
        let next = self.child(*state, which);
        let noise = if self.leaf_mean(next).is_some() && self.spec.sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            z.clamp(-NOISE_CLIP_SIGMAS, NOISE_CLIP_SIGMAS)
        } else {
            0.0
        };
        self.arrive(next, noise)
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let spread = NOISE_CLIP_SIGMAS * self.spec.sigma;
        (-spread, 1.0 + spread)
    }

    fn discount(&self) -> f64 {
        1.0
    }

    fn step_cap(&self) -> usize {
        self.spec.depth
    }

    /// Each episode pays exactly one reward, so the reward floor bounds every
    /// discounted return.
    fn return_floor(&self, _gamma: f64, _max_steps: usize) -> f64 {
        self.reward_bounds().0.min(0.0)
    }

    fn outcomes(&self, state: &TreeNode, action: usize) -> Option<Vec<Outcome<TreeNode>>> {
        let k = self.spec.branching;
        Some(
            (0..k)
                .map(|which| self.child_prob(action, which))
                .enumerate()
                .filter(|&(_, prob)| prob > 0.0)
                .map(|(which, prob)| {
                    let t = self.arrive(self.child(*state, which), 0.0);
                    Outcome {
                        next: t.next,
                        prob,
                        reward: t.reward,
                        terminal: t.terminal,
                    }
                })
                .collect(),
        )
    }
}
