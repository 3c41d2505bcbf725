//! Small statistics helpers shared by the experiment modules.
//!
//! Reductions over ensembles use compensated summation in member order so the
//! results are bitwise independent of how many workers produced them.

/// Kahan compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn mean(values: &[f64]) -> f64 {
    kahan_sum(values.iter().copied()) / values.len() as f64
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "need at least two samples");
    let m = mean(values);
    let var = kahan_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares through (x, y) points; None with fewer than two
/// distinct x values.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = kahan_sum(points.iter().map(|p| p.0)) / n;
    let my = kahan_sum(points.iter().map(|p| p.1)) / n;
    let sxx = kahan_sum(points.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = kahan_sum(points.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx })
}

/// Weighted least-squares slope for points with known standard errors,
/// returning (slope, slope standard error).
pub fn weighted_slope(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.2 * p.2).max(1e-300)).collect();
    let sw = kahan_sum(w.iter().copied());
    let mx = kahan_sum(points.iter().zip(&w).map(|(p, wi)| wi * p.0)) / sw;
    let sxx = kahan_sum(points.iter().zip(&w).map(|(p, wi)| wi * (p.0 - mx) * (p.0 - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = kahan_sum(points.iter().zip(&w).map(|(p, wi)| wi * (p.0 - mx) * p.1));
    Some((sxy / sxx, (1.0 / sxx).sqrt()))
}

/// Standard error of the mean-zero variance estimator of a Gaussian AR(1)
/// sequence with lag-one autocorrelation `rho`, true variance `sigma2`,
/// over `n` consecutive samples:
/// `Var(v^) = (2 sigma2^2 / n) (1 + rho^2)/(1 - rho^2)`.
pub fn ar1_variance_se(sigma2: f64, rho: f64, n: usize) -> f64 {
    let r2 = rho * rho;
    (2.0 * sigma2 * sigma2 / n as f64 * (1.0 + r2) / (1.0 - r2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kahan_handles_cancellation() {
        let xs = vec![1e16, 1.0, -1e16];
        assert_eq!(kahan_sum(xs), 1.0);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_slope_matches_ols_for_equal_weights() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 0.5 * i as f64 + 1.0)).collect();
        let w: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.0, p.1, 2.0)).collect();
        let (slope, se) = weighted_slope(&w).unwrap();
        assert_abs_diff_eq!(slope, linear_fit(&pts).unwrap().slope, epsilon = 1e-12);
        assert!(se > 0.0);
    }

    #[test]
    fn degenerate_fits_return_none() {
        assert!(linear_fit(&[(1.0, 2.0)]).is_none());
        assert!(linear_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_none());
    }
}
