//! Summary statistics, log-log rate fits and Welch's t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

/// Sample mean and unbiased variance (zero variance for a single sample).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

/// Least-squares slope of `ln(error)` against `ln(n)`.
pub fn fit_polynomial_rate(budgets: &[u64], errors: &[f64]) -> Result<f64> {
    if budgets.len() != errors.len() {
        return invalid(format!(
            "{} budgets but {} errors",
            budgets.len(),
            errors.len()
        ));
    }
    if budgets.len() < 3 {
        return invalid("a rate fit needs at least three points");
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) || budgets[0] == 0 {
        return invalid("budgets must be positive and strictly increasing");
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return invalid(format!("errors must be positive, got {e}"));
    }
    let xs: Vec<f64> = budgets.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Two-sided Welch t-test p-value from summary statistics.
///
/// When both variances are zero the test degenerates: equal means give
/// `p = 1`, different means `p = 0`.
pub fn welch_t_test(
    mean_a: f64,
    var_a: f64,
    n_a: usize,
    mean_b: f64,
    var_b: f64,
    n_b: usize,
) -> Result<f64> {
    if n_a < 2 || n_b < 2 {
        return invalid("each sample needs at least two observations");
    }
    if !(var_a >= 0.0 && var_b >= 0.0) {
        return invalid("variances must be nonnegative");
    }
    let (sa, sb) = (var_a / n_a as f64, var_b / n_b as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if mean_a == mean_b { 1.0 } else { 0.0 });
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (n_a - 1) as f64 + sb * sb / (n_b - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| crate::Error::InvalidArgument(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}
