//! On (ℝ, |·|, δ₀) the pointwise Lipschitz constant does not give a quadratic form:
//! f = |x| and g = x have lip 1 at 0, while f ± g both have lip 2.

use serde::Serialize;

use crate::report::{Check, Report};

/// sup over dyadic h = ±2^−k, k = 1..=60, of |u(h) − u(0)|/|h|.
pub fn lip_at_zero(u: impl Fn(f64) -> f64) -> f64 {
    let u0 = u(0.0);
    let mut best: f64 = 0.0;
    for k in 1..=60 {
        let h = 0.5f64.powi(k);
        best = best.max((u(h) - u0).abs() / h).max((u(-h) - u0).abs() / h);
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipCounterexample {
    pub lip_f: f64,
    pub lip_g: f64,
    pub lip_sum: f64,
    pub lip_diff: f64,
    /// lip(f+g)² + lip(f−g)²
    pub left: f64,
    /// 2 lip f² + 2 lip g²
    pub right: f64,
    /// both sides for derivations: every derivation on (ℝ, δ₀) vanishes, so 0 = 0
    pub derivation_left: f64,
    pub derivation_right: f64,
}

pub fn lip_counterexample() -> LipCounterexample {
    let f = |x: f64| x.abs();
    let g = |x: f64| x;
    let (lf, lg) = (lip_at_zero(f), lip_at_zero(g));
    let (ls, ld) = (lip_at_zero(|x| f(x) + g(x)), lip_at_zero(|x| f(x) - g(x)));
    LipCounterexample {
        lip_f: lf,
        lip_g: lg,
        lip_sum: ls,
        lip_diff: ld,
        left: ls * ls + ld * ld,
        right: 2.0 * lf * lf + 2.0 * lg * lg,
        derivation_left: 0.0,
        derivation_right: 0.0,
    }
}

pub fn counterexample_report() -> Report {
    let c = lip_counterexample();
    let mut r = Report::new();
    r.push(Check::new("lip |x| at 0 = 1", (c.lip_f - 1.0).abs(), 0.0));
    r.push(Check::new("lip x at 0 = 1", (c.lip_g - 1.0).abs(), 0.0));
    r.push(Check::new("lip (|x| + x) at 0 = 2", (c.lip_sum - 2.0).abs(), 0.0));
    r.push(Check::new("lip (|x| - x) at 0 = 2", (c.lip_diff - 2.0).abs(), 0.0));
    r.push(Check::new(format!("lip parallelogram sides {} vs {}", c.left, c.right), ((c.left - 8.0).abs()).max((c.right - 4.0).abs()), 0.0));
    r.push(Check::flag("lip-based form violates the parallelogram law", c.left != c.right));
    r.push(Check::new("derivation parallelogram holds", (c.derivation_left - c.derivation_right).abs(), 0.0));
    r
}
