//! Exploration bonus schedules.
//!
//! Three bonus shapes are supported:
//!
//! * fixed polynomial `C · n^(1/4) / t^(1/2)`,
//! * adaptive polynomial `C · n^(b/β) / t^(α/β)` with per-depth exponent
//!   constants `(α_i, β_i, b_i)`,
//! * logarithmic (UCB1) `C · sqrt(ln n / t)`.
//!
//! The adaptive constants must satisfy a set of row conditions at every depth
//! index, plus a recurrence coupling index `i` to `i + 1`. [`derive_schedule`]
//! builds such a schedule bottom-up from `β_H`; [`validate_schedule`] checks
//! an arbitrary one.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

const COUPLING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BonusKind {
    FixedPolynomial,
    AdaptivePolynomial,
    Logarithmic,
}

impl BonusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BonusKind::FixedPolynomial => "fixed",
            BonusKind::AdaptivePolynomial => "adaptive",
            BonusKind::Logarithmic => "log",
        }
    }
}

impl fmt::Display for BonusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BonusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(BonusKind::FixedPolynomial),
            "adaptive" => Ok(BonusKind::AdaptivePolynomial),
            "log" => Ok(BonusKind::Logarithmic),
            other => Err(Error::Config(format!(
                "unknown bonus kind {other:?} (expected fixed, adaptive or log)"
            ))),
        }
    }
}

/// Exponent constants for one depth index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthConstants {
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonusSchedule {
    kind: BonusKind,
    c: f64,
    horizon: usize,
    constants: Vec<DepthConstants>,
    p_for_validation: f64,
}

/// One failed condition of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub depth: usize,
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth {}: {} fails (lhs {}, rhs {})",
            self.depth, self.condition, self.lhs, self.rhs
        )
    }
}

/// Outcome of [`derive_schedule`].
#[derive(Debug, Clone, PartialEq)]
pub enum Derivation {
    Feasible(BonusSchedule),
    Infeasible {
        violation: Violation,
        /// Constants emitted before the failure, indexed by depth.
        /// Entries below the failing depth are `None`.
        partial: Vec<Option<DepthConstants>>,
    },
}

impl Derivation {
    pub fn feasible(self) -> Option<BonusSchedule> {
        match self {
            Derivation::Feasible(s) => Some(s),
            Derivation::Infeasible { .. } => None,
        }
    }
}

impl BonusSchedule {
    fn check_common(c: f64, horizon: usize) -> Result<()> {
        if !(c.is_finite() && c > 0.0) {
            return invalid(format!("exploration constant must be positive, got {c}"));
        }
        if horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        Ok(())
    }

    /// `C · n^(1/4) / t^(1/2)`.
    pub fn fixed(c: f64, horizon: usize) -> Result<Self> {
        Self::check_common(c, horizon)?;
        Ok(Self {
            kind: BonusKind::FixedPolynomial,
            c,
            horizon,
            constants: Vec::new(),
            p_for_validation: 1.0,
        })
    }

    /// `C · sqrt(ln n / t)`.
    pub fn logarithmic(c: f64, horizon: usize) -> Result<Self> {
        Self::check_common(c, horizon)?;
        Ok(Self {
            kind: BonusKind::Logarithmic,
            c,
            horizon,
            constants: Vec::new(),
            p_for_validation: 1.0,
        })
    }

    /// Adaptive schedule from explicit per-depth constants, indexed `0..=horizon`.
    /// The constants are stored as given; use [`validate_schedule`] to check them.
    pub fn adaptive(c: f64, constants: Vec<DepthConstants>, p: f64) -> Result<Self> {
        if constants.len() < 2 {
            return invalid("adaptive schedule needs constants for depths 0..=H with H >= 1");
        }
        let horizon = constants.len() - 1;
        Self::check_common(c, horizon)?;
        if !(p.is_finite() && p >= 1.0) {
            return invalid(format!("p must be finite and >= 1, got {p}"));
        }
        for (i, k) in constants.iter().enumerate() {
            if ![k.alpha, k.beta, k.b]
                .iter()
                .all(|x| x.is_finite() && *x > 0.0)
            {
                return invalid(format!(
                    "constants at depth {i} must be positive and finite"
                ));
            }
        }
        Ok(Self {
            kind: BonusKind::AdaptivePolynomial,
            c,
            horizon,
            constants,
            p_for_validation: p,
        })
    }

    pub fn kind(&self) -> BonusKind {
        self.kind
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn constants(&self) -> &[DepthConstants] {
        &self.constants
    }

    pub fn p_for_validation(&self) -> f64 {
        self.p_for_validation
    }

    /// Same schedule with another exploration constant.
    pub fn with_c(mut self, c: f64) -> Result<Self> {
        Self::check_common(c, self.horizon)?;
        self.c = c;
        Ok(self)
    }

    /// Exploration bonus at tree depth `depth` for a node visited `n` times
    /// and an action taken `t` times there. An untried action gets `+∞`.
    pub fn bonus(&self, depth: usize, n: u64, t: u64) -> Result<f64> {
        if depth >= self.horizon {
            return invalid(format!(
                "depth {depth} outside [0, {}) for this schedule",
                self.horizon
            ));
        }
        Ok(self.bonus_unchecked(depth, n, t))
    }

    #[inline]
    pub(crate) fn bonus_unchecked(&self, depth: usize, n: u64, t: u64) -> f64 {
        if t == 0 {
            return f64::INFINITY;
        }
        let (n, t) = (n as f64, t as f64);
        match self.kind {
            BonusKind::FixedPolynomial => self.c * n.powf(0.25) / t.sqrt(),
            BonusKind::AdaptivePolynomial => {
                // selection at depth h uses the constants of index h + 1
                let k = &self.constants[depth + 1];
                self.c * n.powf(k.b / k.beta) / t.powf(k.alpha / k.beta)
            }
            BonusKind::Logarithmic => self.c * (n.max(1.0).ln() / t).sqrt(),
        }
    }

    /// Plain-text form: one `depth alpha beta b` line per index.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# kind={} C={} horizon={} p={}\n",
            self.kind, self.c, self.horizon, self.p_for_validation
        );
        for (i, k) in self.constants.iter().enumerate() {
            out.push_str(&format!("{i} {} {} {}\n", k.alpha, k.beta, k.b));
        }
        out
    }

    /// Parses the per-depth triples written by [`BonusSchedule::to_text`].
    pub fn adaptive_from_text(text: &str, c: f64, p: f64) -> Result<Self> {
        let mut constants = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::Config(format!("bad number {s:?} in schedule line {line:?}"))
                })
            };
            match fields.as_slice() {
                [idx, a, bt, b] => {
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| Error::Config(format!("bad depth index in {line:?}")))?;
                    if idx != constants.len() {
                        return Err(Error::Config(format!(
                            "schedule depths must be listed in order, found {idx}"
                        )));
                    }
                    constants.push(DepthConstants {
                        alpha: parse(a)?,
                        beta: parse(bt)?,
                        b: parse(b)?,
                    });
                }
                _ => return Err(Error::Config(format!("expected 4 fields in {line:?}"))),
            }
        }
        Self::adaptive(c, constants, p)
    }
}

/// Checks the row conditions for a single depth index.
fn row_violations(depth: usize, k: &DepthConstants, p: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut need = |ok: bool, condition: &'static str, lhs: f64, rhs: f64| {
        if !ok {
            out.push(Violation {
                depth,
                condition,
                lhs,
                rhs,
            });
        }
    };
    need(k.b > 2.0, "b > 2", k.b, 2.0);
    need(k.b < k.alpha, "b < alpha", k.b, k.alpha);
    need(
        k.alpha <= k.beta / 2.0,
        "alpha <= beta/2",
        k.alpha,
        k.beta / 2.0,
    );
    if p > 2.0 {
        let gap = k.alpha - k.beta / p;
        need(gap > 0.0, "alpha - beta/p > 0", gap, 0.0);
        need(gap < 1.0, "alpha - beta/p < 1", gap, 1.0);
    }
    let lhs = k.alpha * (1.0 - k.b / k.alpha);
    need(lhs <= k.b, "alpha(1 - b/alpha) <= b", lhs, k.b);
    out
}

/// Child-to-parent exponent map: the constants at index `i` implied by `b`
/// and `alpha` at index `i + 1`.
fn parent_constants(child_alpha: f64, child_b: f64) -> (f64, f64) {
    let beta = child_b - 1.0;
    let alpha = (child_b - 1.0) * (1.0 - child_b / child_alpha);
    (alpha, beta)
}

/// Lists every condition an adaptive schedule fails. Non-adaptive schedules
/// have no constants and always validate.
///
/// For `p ≤ 2` the recurrence must hold with equality. For `p > 2` the
/// parent `alpha` may sit below the recurrence value, since lowering it is
/// how the extra `alpha - beta/p < 1` condition is met.
pub fn validate_schedule(s: &BonusSchedule) -> Vec<Violation> {
    if s.kind != BonusKind::AdaptivePolynomial {
        return Vec::new();
    }
    let p = s.p_for_validation;
    let mut out = Vec::new();
    for (i, k) in s.constants.iter().enumerate() {
        out.extend(row_violations(i, k, p));
    }
    for i in 0..s.horizon {
        let child = &s.constants[i + 1];
        let parent = &s.constants[i];
        let (alpha, beta) = parent_constants(child.alpha, child.b);
        if (parent.beta - beta).abs() > COUPLING_TOL {
            out.push(Violation {
                depth: i,
                condition: "beta_i = b_{i+1} - 1",
                lhs: parent.beta,
                rhs: beta,
            });
        }
        let alpha_ok = if p > 2.0 {
            parent.alpha <= alpha + COUPLING_TOL
        } else {
            (parent.alpha - alpha).abs() <= COUPLING_TOL
        };
        if !alpha_ok {
            out.push(Violation {
                depth: i,
                condition: if p > 2.0 {
                    "alpha_i <= (b_{i+1} - 1)(1 - b_{i+1}/alpha_{i+1})"
                } else {
                    "alpha_i = (b_{i+1} - 1)(1 - b_{i+1}/alpha_{i+1})"
                },
                lhs: parent.alpha,
                rhs: alpha,
            });
        }
    }
    out
}

/// Builds an adaptive schedule for horizon `horizon` from `beta_h`.
///
/// Starts at `alpha_H = beta_H / 2` and walks down, picking
/// `b = (alpha + 1) / 2` at every index (the maximiser of the parent
/// `alpha`). For `p > 2`, `alpha` is capped at `beta/p + 1/2`. The walk
/// stops with an infeasibility report at the first index whose constants
/// fail a row condition.
pub fn derive_schedule(horizon: usize, beta_h: f64, p: f64, c: f64) -> Result<Derivation> {
    if horizon == 0 {
        return invalid("horizon must be at least 1");
    }
    if !(beta_h.is_finite() && beta_h > 0.0) {
        return invalid(format!("beta_H must be positive and finite, got {beta_h}"));
    }
    if !(p.is_finite() && p >= 1.0) {
        return invalid(format!("p must be finite and >= 1, got {p}"));
    }
    if !(c.is_finite() && c > 0.0) {
        return invalid(format!("exploration constant must be positive, got {c}"));
    }

    let cap = |alpha: f64, beta: f64| {
        if p > 2.0 {
            alpha.min(beta / p + 0.5)
        } else {
            alpha
        }
    };

    let mut partial: Vec<Option<DepthConstants>> = vec![None; horizon + 1];
    let mut beta = beta_h;
    let mut alpha = cap(beta_h / 2.0, beta_h);
    for depth in (0..=horizon).rev() {
        let k = DepthConstants {
            alpha,
            beta,
            b: (alpha + 1.0) / 2.0,
        };
        if let Some(violation) = row_violations(depth, &k, p).into_iter().next() {
            return Ok(Derivation::Infeasible { violation, partial });
        }
        partial[depth] = Some(k);
        let (a, bt) = parent_constants(k.alpha, k.b);
        beta = bt;
        alpha = cap(a, bt);
    }

    let constants = partial
        .into_iter()
        .map(|k| k.expect("every depth filled"))
        .collect();
    Ok(Derivation::Feasible(BonusSchedule {
        kind: BonusKind::AdaptivePolynomial,
        c,
        horizon,
        constants,
        p_for_validation: p,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Recurrence evaluated directly, independent of `derive_schedule`'s loop.
    fn recurrence_alpha(child_alpha: f64) -> (f64, f64, f64) {
        let b = (child_alpha + 1.0) / 2.0;
        let beta = b - 1.0;
        (b, beta, beta * (1.0 - b / child_alpha))
    }

    #[test]
    fn one_level_from_beta_120() {
        let s = derive_schedule(1, 120.0, 2.0, 1.0)
            .unwrap()
            .feasible()
            .unwrap();
        let k = s.constants();
        assert_eq!(k[1].alpha, 60.0);
        assert_eq!(k[1].b, 30.5);
        assert_eq!(k[0].beta, 29.5);
        // 29.5 * (1 - 30.5/60) = 59^2 / 240
        assert_relative_eq!(k[0].alpha, 59.0 * 59.0 / 240.0, epsilon = 1e-12);
        assert_relative_eq!(k[0].alpha, 14.5042, epsilon = 1e-4);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn two_levels_from_beta_120() {
        let s = derive_schedule(2, 120.0, 2.0, 1.0)
            .unwrap()
            .feasible()
            .unwrap();
        let k = s.constants();
        let (b2, beta1, alpha1) = recurrence_alpha(60.0);
        let (b1, beta0, alpha0) = recurrence_alpha(alpha1);
        assert_eq!(k[2].b, b2);
        assert_relative_eq!(k[1].beta, beta1);
        assert_relative_eq!(k[1].alpha, alpha1, epsilon = 1e-12);
        assert_relative_eq!(k[1].b, b1, epsilon = 1e-12);
        assert_relative_eq!(k[1].b, 7.7521, epsilon = 1e-4);
        assert_relative_eq!(k[0].beta, beta0, epsilon = 1e-12);
        assert_relative_eq!(k[0].beta, 6.7521, epsilon = 1e-4);
        assert_relative_eq!(k[0].alpha, alpha0, epsilon = 1e-12);
        assert_relative_eq!(k[0].alpha, 3.14328, epsilon = 1e-4);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn five_levels_from_beta_120_is_infeasible() {
        match derive_schedule(5, 120.0, 2.0, 1.0).unwrap() {
            Derivation::Infeasible { violation, partial } => {
                assert_eq!(violation.condition, "b > 2");
                // 60 -> 14.50 -> 3.143 -> 0.366: b = 0.68 at index 2
                assert_eq!(violation.depth, 2);
                assert!(partial[3..].iter().all(Option::is_some));
                assert!(partial[..=2].iter().all(Option::is_none));
            }
            Derivation::Feasible(_) => panic!("expected infeasibility"),
        }
    }

    #[test]
    fn large_p_keeps_alpha_within_one_of_beta_over_p() {
        let s = derive_schedule(1, 120.0, 4.0, 1.0)
            .unwrap()
            .feasible()
            .unwrap();
        for k in s.constants() {
            let gap = k.alpha - k.beta / 4.0;
            assert!(gap > 0.0 && gap < 1.0, "gap {gap}");
        }
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn boundary_violations_are_named() {
        let mut s = derive_schedule(2, 120.0, 2.0, 1.0)
            .unwrap()
            .feasible()
            .unwrap();
        s.constants[1].b = 2.0;
        let v = validate_schedule(&s);
        assert!(v.iter().any(|v| v.depth == 1 && v.condition == "b > 2"));

        let mut s = derive_schedule(2, 120.0, 2.0, 1.0)
            .unwrap()
            .feasible()
            .unwrap();
        s.constants[1].alpha = s.constants[1].beta;
        let v = validate_schedule(&s);
        assert!(v
            .iter()
            .any(|v| v.depth == 1 && v.condition == "alpha <= beta/2"));
    }

    #[test]
    fn rejects_bad_derivation_input() {
        assert!(derive_schedule(0, 120.0, 2.0, 1.0).is_err());
        assert!(derive_schedule(2, f64::NAN, 2.0, 1.0).is_err());
        assert!(derive_schedule(2, 120.0, 0.5, 1.0).is_err());
        assert!(derive_schedule(2, 120.0, 2.0, 0.0).is_err());
        // beta_H <= 4 cannot give b > 2 at the top index
        assert!(matches!(
            derive_schedule(1, 4.0, 2.0, 1.0).unwrap(),
            Derivation::Infeasible { .. }
        ));
    }

    #[test]
    fn bonus_examples() {
        let fixed = BonusSchedule::fixed(1.0, 3).unwrap();
        assert_relative_eq!(fixed.bonus(0, 16, 4).unwrap(), 1.0, epsilon = 1e-15);
        let log = BonusSchedule::logarithmic(1.0, 3).unwrap();
        assert_relative_eq!(log.bonus(1, 0, 1).unwrap(), 0.0);
        // n = e is not an integer; check the formula at n = 1, 10 instead
        assert_relative_eq!(
            log.bonus(0, 10, 1).unwrap(),
            10f64.ln().sqrt(),
            epsilon = 1e-15
        );
        let adaptive = derive_schedule(2, 120.0, 2.0, 1.0)
            .unwrap()
            .feasible()
            .unwrap();
        for s in [&fixed, &log, &adaptive] {
            assert_eq!(s.bonus(0, 5, 0).unwrap(), f64::INFINITY);
            assert!(s.bonus(s.horizon(), 5, 1).is_err());
        }
    }

    #[test]
    fn fixed_matches_adaptive_with_quarter_half_ratios() {
        let k = DepthConstants {
            alpha: 8.0,
            beta: 16.0,
            b: 4.0,
        };
        let s = BonusSchedule::adaptive(0.7, vec![k, k, k], 1.0).unwrap();
        let f = BonusSchedule::fixed(0.7, 2).unwrap();
        for n in [1u64, 2, 17, 1000, 123_456] {
            for t in 1..=n.min(50) {
                let a = s.bonus(1, n, t).unwrap();
                let b = f.bonus(1, n, t).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * a.max(1.0),
                    "n={n} t={t}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let s = derive_schedule(2, 130.0, 2.0, 0.01)
            .unwrap()
            .feasible()
            .unwrap();
        let back = BonusSchedule::adaptive_from_text(&s.to_text(), 0.01, 2.0).unwrap();
        assert_eq!(s, back);
    }

    fn any_schedule() -> impl Strategy<Value = BonusSchedule> {
        (0.01f64..2.0, 0usize..3).prop_map(|(c, which)| match which {
            0 => BonusSchedule::fixed(c, 2).unwrap(),
            1 => BonusSchedule::logarithmic(c, 2).unwrap(),
            _ => derive_schedule(2, 120.0, 2.0, c)
                .unwrap()
                .feasible()
                .unwrap(),
        })
    }

    proptest! {
        #[test]
        fn bonus_decreasing_in_t_nondecreasing_in_n(
            s in any_schedule(), depth in 0usize..2, n in 2u64..1_000_000, t in 1u64..10_000,
        ) {
            // n >= 2: the log bonus is identically zero at n = 1
            let here = s.bonus(depth, n, t).unwrap();
            prop_assert!(s.bonus(depth, n, t + 1).unwrap() < here);
            prop_assert!(s.bonus(depth, n + 1, t).unwrap() >= here);
        }

        #[test]
        fn derived_schedules_validate(h in 1usize..4, beta in 4.5f64..400.0, p in 1.0f64..8.0) {
            if let Derivation::Feasible(s) = derive_schedule(h, beta, p, 1.0).unwrap() {
                prop_assert!(validate_schedule(&s).is_empty(), "{:?}", validate_schedule(&s));
            }
        }
    }
}
