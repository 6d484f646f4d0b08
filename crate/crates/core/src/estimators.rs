//! Power-mean and incremental-mean primitives.
//!
//! The power mean of order `p` over visit-weighted values is
//! `(Σ_a (T_a / Σ T) · x_a^p)^(1/p)`. Order 1 is the weighted arithmetic mean
//! and the result tends to the maximum as `p` grows. Inputs must be
//! nonnegative; callers with signed values shift them first.

use crate::error::{invalid, Result};

/// Values with their visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedValues {
    values: Vec<f64>,
    counts: Vec<u64>,
}

impl WeightedValues {
    pub fn new(values: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        validate(&values, &counts)?;
        Ok(Self { values, counts })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn power_mean(&self, p: f64) -> Result<f64> {
        power_mean(&self.values, &self.counts, p)
    }
}

fn validate(values: &[f64], counts: &[u64]) -> Result<()> {
    if values.is_empty() {
        return invalid("power mean of an empty set");
    }
    if values.len() != counts.len() {
        return invalid(format!(
            "{} values but {} counts",
            values.len(),
            counts.len()
        ));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return invalid(format!("value {v} is not a finite nonnegative number"));
    }
    if counts.iter().all(|&c| c == 0) {
        return invalid("all counts are zero");
    }
    Ok(())
}

/// Visit-weighted arithmetic mean. Accepts signed values; zero-count entries
/// are skipped.
pub fn weighted_mean(values: &[f64], counts: &[u64]) -> f64 {
    let mut total = 0u64;
    let mut sum = 0.0;
    for (&v, &c) in values.iter().zip(counts) {
        if c > 0 {
            sum += c as f64 * v;
            total += c;
        }
    }
    if total == 0 {
        0.0
    } else {
        sum / total as f64
    }
}

/// Power mean of order `p ≥ 1` of visit-weighted nonnegative values.
///
/// `p = 1` and `p = 2` use direct sums. Other orders are evaluated as a
/// log-sum-exp with the largest term factored out, so `p` in the thousands
/// neither overflows nor underflows. Zero values contribute exactly zero.
pub fn power_mean(values: &[f64], counts: &[u64], p: f64) -> Result<f64> {
    if !p.is_finite() || p < 1.0 {
        return invalid(format!("power mean order must be finite and >= 1, got {p}"));
    }
    validate(values, counts)?;

    let (lo, hi) = weighted_range(values, counts);
    let raw = if p == 1.0 {
        weighted_mean(values, counts)
    } else if p == 2.0 {
        let total: u64 = counts.iter().sum();
        let sq: f64 = values
            .iter()
            .zip(counts)
            .filter(|(_, &c)| c > 0)
            .map(|(&v, &c)| c as f64 * v * v)
            .sum();
        (sq / total as f64).sqrt()
    } else {
        log_domain_power_mean(values, counts, p)
    };
    // round-off can push the result a hair outside the hull of the inputs
    Ok(raw.clamp(lo, hi))
}

fn weighted_range(values: &[f64], counts: &[u64]) -> (f64, f64) {
    values
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
            (lo.min(v), hi.max(v))
        })
}

fn log_domain_power_mean(values: &[f64], counts: &[u64], p: f64) -> f64 {
    let total = counts.iter().sum::<u64>() as f64;
    let log_total = total.ln();
    // log of w_a * x_a^p for every positively weighted, nonzero value
    let mut max_term = f64::NEG_INFINITY;
    for (&v, &c) in values.iter().zip(counts) {
        if c > 0 && v > 0.0 {
            let t = (c as f64).ln() - log_total + p * v.ln();
            max_term = max_term.max(t);
        }
    }
    if max_term == f64::NEG_INFINITY {
        return 0.0;
    }
    let scaled: f64 = values
        .iter()
        .zip(counts)
        .filter(|(&v, &c)| c > 0 && v > 0.0)
        .map(|(&v, &c)| ((c as f64).ln() - log_total + p * v.ln() - max_term).exp())
        .sum();
    ((max_term + scaled.ln()) / p).exp()
}

/// Incrementally maintained sample mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    mean: f64,
    count: u64,
}

impl RunningMean {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Returns the statistics after folding in one more sample:
    /// `(mean · count + sample) / (count + 1)`.
    pub fn update(self, sample: f64) -> Result<Self> {
        if !sample.is_finite() {
            return invalid(format!("non-finite sample {sample}"));
        }
        let n = self.count as f64;
        Ok(Self {
            mean: (self.mean * n + sample) / (n + 1.0),
            count: self.count + 1,
        })
    }

    /// In-place variant of [`RunningMean::update`].
    pub fn push(&mut self, sample: f64) -> Result<()> {
        *self = self.update(sample)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn arithmetic_mean_at_order_one() {
        assert_eq!(power_mean(&[1.0, 3.0], &[1, 1], 1.0).unwrap(), 2.0);
    }

    #[test]
    fn quadratic_mean_hand_value() {
        // sqrt((2 * 0.25 + 1 * 1.0) / 3) = sqrt(0.5)
        let v = power_mean(&[0.5, 1.0], &[2, 1], 2.0).unwrap();
        assert_relative_eq!(v, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        // same value through the log-domain path
        let v = log_domain_power_mean(&[0.5, 1.0], &[2, 1], 2.0);
        assert_relative_eq!(v, 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn equal_values_are_fixed_points() {
        for p in [1.0, 1.5, 2.0, 7.0, 300.0] {
            let v = power_mean(&[0.3, 0.3, 0.3], &[5, 1, 9], p).unwrap();
            assert_relative_eq!(v, 0.3, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_values_and_zero_counts() {
        // zero value keeps its weight but adds nothing to the sum
        let v = power_mean(&[0.0, 2.0], &[1, 1], 3.0).unwrap();
        assert_relative_eq!(v, (4.0f64).powf(1.0 / 3.0), epsilon = 1e-12);
        assert_eq!(power_mean(&[0.0, 0.0], &[3, 1], 5.0).unwrap(), 0.0);
        // zero-count entries are ignored entirely
        let v = power_mean(&[9.0, 2.0], &[0, 4], 4.0).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn extreme_orders_stay_finite() {
        let v = power_mean(&[1000.0, 999.0, 0.001], &[1, 1000, 1_000_000], 1000.0).unwrap();
        assert!(v.is_finite() && (0.001..=1000.0).contains(&v));
        let v = power_mean(&[1e-3, 2e-3], &[1, 1], 1000.0).unwrap();
        assert!(v.is_finite() && v > 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(power_mean(&[], &[], 2.0).is_err());
        assert!(power_mean(&[1.0], &[1, 2], 2.0).is_err());
        assert!(power_mean(&[-0.1, 1.0], &[1, 1], 2.0).is_err());
        assert!(power_mean(&[1.0, 1.0], &[0, 0], 2.0).is_err());
        assert!(power_mean(&[1.0], &[1], 0.5).is_err());
        assert!(power_mean(&[1.0], &[1], f64::NAN).is_err());
        assert!(power_mean(&[f64::INFINITY], &[1], 2.0).is_err());
        assert!(WeightedValues::new(vec![1.0], vec![0]).is_err());
    }

    #[test]
    fn running_mean_examples() {
        let rm = RunningMean::new().update(5.0).unwrap();
        assert_eq!((rm.mean(), rm.count()), (5.0, 1));

        let rm = RunningMean {
            mean: 2.0,
            count: 3,
        }
        .update(6.0)
        .unwrap();
        assert_eq!((rm.mean(), rm.count()), (3.0, 4));

        let mut rm = RunningMean::new();
        for x in [1.0, 2.0, 3.0, 4.0] {
            rm.push(x).unwrap();
        }
        assert_eq!((rm.mean(), rm.count()), (2.5, 4));

        assert!(RunningMean::new().update(f64::NAN).is_err());
    }

    fn weighted() -> impl Strategy<Value = (Vec<f64>, Vec<u64>)> {
        (1usize..=64).prop_flat_map(|len| {
            (
                prop::collection::vec(0.0f64..1000.0, len),
                prop::collection::vec(1u64..=1_000_000, len),
            )
        })
    }

    proptest! {
        #[test]
        fn order_one_is_weighted_mean((values, counts) in weighted()) {
            let total: f64 = counts.iter().map(|&c| c as f64).sum();
            let direct: f64 = values.iter().zip(&counts).map(|(v, &c)| v * c as f64).sum::<f64>() / total;
            let pm = power_mean(&values, &counts, 1.0).unwrap();
            prop_assert!((pm - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
        }

        #[test]
        fn monotone_in_order((values, counts) in weighted(), p1 in 1.0f64..20.0, dp in 0.0f64..20.0) {
            let a = power_mean(&values, &counts, p1).unwrap();
            let b = power_mean(&values, &counts, p1 + dp).unwrap();
            prop_assert!(a <= b + 1e-12 * b.max(1.0));
        }

        #[test]
        fn bounded_by_weighted_hull((values, counts) in weighted(), p in 1.0f64..200.0) {
            let v = power_mean(&values, &counts, p).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }

        #[test]
        fn large_order_approaches_max(
            values in prop::collection::vec(0.1f64..=1.0, 1..=64),
            // weight of the max is at least 1/6301, so the gap is at most 1 - 6301^(-1/512) < 0.018
            seed_counts in prop::collection::vec(1u64..=100, 64),
        ) {
            let counts = &seed_counts[..values.len()];
            let v = power_mean(&values, counts, 512.0).unwrap();
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(hi - v <= 0.02);
        }

        #[test]
        fn folded_running_mean_is_batch_mean(samples in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let mut rm = RunningMean::new();
            for &x in &samples {
                rm.push(x).unwrap();
            }
            let batch = samples.iter().sum::<f64>() / samples.len() as f64;
            prop_assert_eq!(rm.count(), samples.len() as u64);
            prop_assert!((rm.mean() - batch).abs() <= 1e-12 * batch.abs().max(1.0));
        }
    }
}
