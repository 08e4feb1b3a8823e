//! Richardson extrapolation of t ↓ 0 limits on a dyadic step sequence.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub steps_used: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct LimitScheme {
    pub halvings: usize,
    /// further halvings tried when the default count has not converged
    pub max_halvings: usize,
    /// number of leading error orders eliminated
    pub order: usize,
    pub rel_tol: f64,
    /// absolute rounding noise of the numerator of a difference quotient; an extra
    /// 16·noise/t is tolerated at step t
    pub noise: f64,
}

impl Default for LimitScheme {
    fn default() -> Self {
        LimitScheme { halvings: 6, max_halvings: 24, order: 2, rel_tol: 1e-9, noise: 0.0 }
    }
}

impl LimitScheme {
    /// lim_{t↓0} f(t) from samples at t₀·2^−k.
    pub fn limit<F>(&self, t0: f64, mut f: F) -> Result<LimitEstimate>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::PreconditionFailed(format!("initial step {t0} must be positive")));
        }
        let mut steps = Vec::new();
        // rows[k][j]: estimate from step k with j orders eliminated
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut last_diff = f64::INFINITY;
        for k in 0..=self.max_halvings {
            let t = t0 * 0.5f64.powi(k as i32);
            steps.push(t);
            let mut row = vec![f(t)?];
            for j in 1..=self.order.min(k) {
                let prev = rows[k - 1][j - 1];
                let cur = row[j - 1];
                row.push(cur + (cur - prev) / ((1u64 << j) as f64 - 1.0));
            }
            rows.push(row);
            if k > self.order {
                let e1 = rows[k][self.order];
                let e0 = rows[k - 1][self.order];
                let diff = (e1 - e0).abs();
                if !diff.is_finite() {
                    return Err(Error::NoConvergence { diff });
                }
                last_diff = diff;
                if k >= self.halvings && diff <= self.rel_tol * (1.0 + e1.abs()) + 16.0 * self.noise / t {
                    return Ok(LimitEstimate { value: e1, error_bound: diff, steps_used: steps });
                }
            }
        }
        Err(Error::NoConvergence { diff: last_diff })
    }
}

pub fn limit<F>(t0: f64, f: F) -> Result<LimitEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    LimitScheme::default().limit(t0, f)
}

/// Limit of a difference quotient (g(t) − g₀)/t whose values g are of size `scale`.
pub fn quotient_limit<F>(t0: f64, scale: f64, f: F) -> Result<LimitEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    LimitScheme { noise: 4.0 * f64::EPSILON * (1.0 + scale.abs()), ..LimitScheme::default() }.limit(t0, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_error_terms_are_removed() {
        let e = limit(0.1, |t| Ok(2.0 + 3.0 * t - 5.0 * t * t)).unwrap();
        assert_abs_diff_eq!(e.value, 2.0, epsilon = 1e-13);
        assert_eq!(e.steps_used.len(), 7);
    }

    #[test]
    fn smooth_quotient() {
        // (sin t)/t → 1 with only even error terms
        let e = limit(0.5, |t| Ok(t.sin() / t)).unwrap();
        assert_abs_diff_eq!(e.value, 1.0, epsilon = 1e-9);
        assert!(e.error_bound >= 0.0);
    }

    #[test]
    fn eventually_constant() {
        let e = limit(1.0, |t| Ok(if t > 0.05 { 7.0 * t } else { 1.5 })).unwrap();
        assert_eq!(e.value, 1.5);
    }

    #[test]
    fn oscillation_does_not_converge() {
        let r = limit(1.0, |t| Ok((1.0 / t).sin()));
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
