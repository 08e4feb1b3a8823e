//! Piecewise-geodesic sampled curves: speed, length, reparametrization, curve-class
//! distance, one-sided derivatives and antipodality.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::comparison_angle;
use crate::space::GeodesicSpace;
use crate::tangent::{d_dist, differential, oplus, tangent_norm, TangentVector};

/// Relative distance to a knot below which a time counts as the knot itself.
const KNOT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve<P> {
    times: Vec<f64>,
    points: Vec<P>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedProfile {
    pub speeds: Vec<f64>,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Antipodality {
    pub defect: f64,
    pub at_knot: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl<P: Clone> SampledCurve<P> {
    pub fn new(times: Vec<f64>, points: Vec<P>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::Invalid("a curve needs matching times and points, at least two of each".into()));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::Invalid("curve times must start at 0 and end at 1".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("curve times must be strictly increasing".into()));
        }
        Ok(SampledCurve { times, points })
    }

    /// Points at equally spaced times.
    pub fn uniform(points: Vec<P>) -> Result<Self> {
        let n = points.len().saturating_sub(1).max(1);
        let times = (0..points.len()).map(|i| i as f64 / n as f64).collect();
        SampledCurve::new(times, points)
    }

    pub fn from_fn(n_intervals: usize, f: impl Fn(f64) -> P) -> Result<Self> {
        SampledCurve::uniform((0..=n_intervals).map(|i| f(i as f64 / n_intervals as f64)).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::PreconditionFailed(format!("time {t} outside [0, 1]")));
        }
        Ok(())
    }

    /// Interval containing t, taking the one to the right at knots (the left one at t = 1).
    fn interval(&self, t: f64) -> usize {
        let n = self.times.len() - 1;
        self.times[1..n].partition_point(|&k| k <= t).min(n - 1)
    }

    /// Index of the interior knot at t, if any.
    pub fn knot_at(&self, t: f64) -> Option<usize> {
        let n = self.times.len() - 1;
        (1..n).find(|&i| (self.times[i] - t).abs() <= KNOT_EPS)
    }
}

impl<P: Clone> SampledCurve<P> {
    pub fn eval<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64) -> Result<P> {
        self.check_time(t)?;
        let i = self.interval(t);
        let (a, b) = (self.times[i], self.times[i + 1]);
        space.geodesic(&self.points[i], &self.points[i + 1], ((t - a) / (b - a)).clamp(0.0, 1.0))
    }

    pub fn speed_profile<S: GeodesicSpace<Point = P>>(&self, space: &S) -> SpeedProfile {
        let mut speeds = Vec::with_capacity(self.times.len() - 1);
        let mut length = 0.0;
        for i in 0..self.times.len() - 1 {
            let d = space.dist(&self.points[i], &self.points[i + 1]);
            speeds.push(d / (self.times[i + 1] - self.times[i]));
            length += d;
        }
        SpeedProfile { speeds, length }
    }

    pub fn length<S: GeodesicSpace<Point = P>>(&self, space: &S) -> f64 {
        self.speed_profile(space).length
    }

    /// Metric speed at t; at knots the right limit.
    pub fn metric_speed<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let i = self.interval(t);
        Ok(space.dist(&self.points[i], &self.points[i + 1]) / (self.times[i + 1] - self.times[i]))
    }

    /// Speed from the dual formula: sup over landmarks y of −(d/dt⁺) d(c_t, y).
    pub fn dual_speed<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64, landmarks: &[P]) -> Result<f64> {
        let v = self.one_sided(space, t, Side::Right)?;
        let mut best: f64 = 0.0;
        for y in landmarks {
            if space.dist(&v.base, y) > 0.0 {
                best = best.max(-d_dist(space, y, &v)?);
            }
        }
        Ok(best)
    }

    /// Landmarks spread around c_t for the dual formula.
    pub fn landmarks<S: GeodesicSpace<Point = P>, R: Rng + ?Sized>(&self, space: &S, t: f64, n: usize, rng: &mut R) -> Result<Vec<P>> {
        let x = self.eval(space, t)?;
        let radius = (space.cat_radius(&x) / 2.0).min(1.0);
        Ok((0..n).map(|_| space.sample_near(&x, radius, rng)).collect())
    }

    /// Constant-speed representative: zero-length pieces are dropped and each knot is
    /// moved to its normalised arclength.
    pub fn const_speed_reparam<S: GeodesicSpace<Point = P>>(&self, space: &S) -> Result<SampledCurve<P>> {
        let total = self.length(space);
        let floor = 1e-14 * (1.0 + total);
        if total <= floor {
            return Err(Error::ConstantCurve);
        }
        let mut points = vec![self.points[0].clone()];
        let mut arcs = vec![0.0];
        let mut acc = 0.0;
        for p in &self.points[1..] {
            let d = space.dist(points.last().unwrap(), p);
            if d <= floor {
                continue;
            }
            acc += d;
            points.push(p.clone());
            arcs.push(acc);
        }
        let mut times: Vec<f64> = arcs.iter().map(|a| a / acc).collect();
        *times.last_mut().unwrap() = 1.0;
        SampledCurve::new(times, points)
    }

    fn one_sided<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64, side: Side) -> Result<TangentVector<P>> {
        self.check_time(t)?;
        let x = self.eval(space, t)?;
        let n = self.times.len() - 1;
        let (target, span) = match side {
            Side::Right => {
                if t >= 1.0 {
                    return Err(Error::PreconditionFailed("no right derivative at t = 1".into()));
                }
                let i = match self.knot_at(t) {
                    Some(k) => k,
                    None => self.interval(t),
                };
                (self.points[i + 1].clone(), self.times[i + 1] - t)
            }
            Side::Left => {
                if t <= 0.0 {
                    return Err(Error::PreconditionFailed("no left derivative at t = 0".into()));
                }
                let i = match self.knot_at(t) {
                    Some(k) => k - 1,
                    None => self.interval(t).min(n - 1),
                };
                (self.points[i].clone(), t - self.times[i])
            }
        };
        Ok(TangentVector { base: x, target, scale: 1.0 / span })
    }

    /// ċ_t⁺, the blow-up of c on [t, t+h]; at knots the derivative may jump.
    pub fn right_derivative<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64) -> Result<TangentVector<P>> {
        if self.knot_at(t).is_some() {
            return Err(Error::KnotPoint { t });
        }
        self.one_sided(space, t, Side::Right)
    }

    /// ċ_t⁻, the blow-up of the reversed curve.
    pub fn left_derivative<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64) -> Result<TangentVector<P>> {
        if self.knot_at(t).is_some() {
            return Err(Error::KnotPoint { t });
        }
        self.one_sided(space, t, Side::Left)
    }

    /// |ċ_t⁺ ⊕ ċ_t⁻|, with knots reported instead of refused.
    pub fn check_antipodality<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64) -> Result<Antipodality> {
        let r = self.one_sided(space, t, Side::Right)?;
        let l = self.one_sided(space, t, Side::Left)?;
        Ok(Antipodality { defect: tangent_norm(space, &oplus(&r, &l))?, at_knot: self.knot_at(t).is_some() })
    }

    /// |(f∘c)'(t⁺) − d_{c_t} f(ċ_t⁺)|, the right derivative of f∘c taken by Richardson
    /// extrapolation on [t, t+h].
    pub fn chain_rule_defect<S, F>(&self, space: &S, t: f64, f: F, semiconvexity: f64) -> Result<f64>
    where
        S: GeodesicSpace<Point = P>,
        F: Fn(&P) -> f64,
    {
        let v = self.right_derivative(space, t)?;
        let df = differential(space, &f, semiconvexity, &v)?;
        let i = self.interval(t);
        let f0 = f(&v.base);
        let h0 = (self.times[i + 1] - t) / 8.0;
        let lhs = crate::limits::quotient_limit(h0, f0, |h| Ok((f(&self.eval(space, t + h)?) - f0) / h))?.value;
        Ok((lhs - df).abs())
    }

    /// max over dyadic δ of ∠̄_{c_t}(c_{t+δ}, c_{t+δ/2}); tends to 0 off knots.
    pub fn angle_condition<S: GeodesicSpace<Point = P>>(&self, space: &S, t: f64, steps: usize) -> Result<f64> {
        let i = self.interval(t);
        let x = self.eval(space, t)?;
        let kappa = space.curvature_bound();
        let mut worst: f64 = 0.0;
        let mut delta = (self.times[i + 1] - t) / 2.0;
        for _ in 0..steps {
            let (p, q) = (self.eval(space, t + delta)?, self.eval(space, t + delta / 2.0)?);
            let (dp, dq) = (space.dist(&x, &p), space.dist(&x, &q));
            if dp > 0.0 && dq > 0.0 {
                worst = worst.max(comparison_angle(kappa, dp, dq, space.dist(&p, &q))?);
            }
            delta /= 2.0;
        }
        Ok(worst)
    }

    pub fn to_json<S: GeodesicSpace<Point = P>>(&self, space: &S) -> Value {
        json!({
            "times": self.times,
            "points": self.points.iter().map(|p| space.point_to_json(p)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json<S: GeodesicSpace<Point = P>>(space: &S, v: &Value) -> Result<Self> {
        let times = v
            .get("times")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Invalid("curve needs 'times'".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Invalid("non-numeric time".into())))
            .collect::<Result<Vec<_>>>()?;
        let points = v
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Invalid("curve needs 'points'".into()))?
            .iter()
            .map(|p| space.point_from_json(p))
            .collect::<Result<Vec<_>>>()?;
        SampledCurve::new(times, points)
    }
}

/// Knots of a piecewise-linear warp φ with φ(0) = 0, φ(1) = 1.
fn warp(nodes: &[(f64, f64)], s: f64) -> f64 {
    for w in nodes.windows(2) {
        let ((a0, b0), (a1, b1)) = (w[0], w[1]);
        if s <= a1 {
            return b0 + (b1 - b0) * (s - a0) / (a1 - a0);
        }
    }
    1.0
}

fn warp_inverse(nodes: &[(f64, f64)], u: f64) -> f64 {
    let swapped: Vec<(f64, f64)> = nodes.iter().map(|&(a, b)| (b, a)).collect();
    warp(&swapped, u)
}

/// Upper estimate of the curve-class distance: both curves are put in constant-speed form
/// and the sup distance is minimised over the identity and a few piecewise-linear warps.
pub fn curve_class_distance<S: GeodesicSpace>(space: &S, c1: &SampledCurve<S::Point>, c2: &SampledCurve<S::Point>) -> Result<f64> {
    let a = c1.const_speed_reparam(space)?;
    let b = c2.const_speed_reparam(space)?;
    let mut warps = vec![vec![(0.0, 0.0), (1.0, 1.0)]];
    for shift in [-0.1, -0.05, 0.05, 0.1] {
        for mid in [0.25, 0.5, 0.75] {
            warps.push(vec![(0.0, 0.0), (mid, mid + shift), (1.0, 1.0)]);
        }
    }
    let mut best = f64::INFINITY;
    for w in &warps {
        let mut knots: Vec<f64> = a.times.clone();
        knots.extend(b.times.iter().map(|&u| warp_inverse(w, u)));
        knots.extend(w.iter().map(|p| p.0));
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut sup: f64 = 0.0;
        for k in knots.windows(2) {
            for j in 0..=4 {
                let s = k[0] + (k[1] - k[0]) * j as f64 / 4.0;
                sup = sup.max(space.dist(&a.eval(space, s)?, &b.eval(space, warp(w, s).clamp(0.0, 1.0))?));
            }
            if sup >= best {
                break;
            }
        }
        best = best.min(sup);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphPoint, MetricGraph};
    use crate::model::ModelSpace;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane() -> ModelSpace {
        ModelSpace::new(0.0)
    }

    fn pt(x: f64, y: f64) -> crate::model::ModelPoint {
        plane().point(&[x, y]).unwrap()
    }

    #[test]
    fn speed_and_length() {
        let e = plane();
        let seg = SampledCurve::uniform(vec![pt(0.0, 0.0), pt(3.0, 4.0)]).unwrap();
        assert_abs_diff_eq!(seg.metric_speed(&e, 0.3).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(seg.length(&e), 5.0, epsilon = 1e-12);
        let sq = SampledCurve::from_fn(1000, |t| pt(t * t, 0.0)).unwrap();
        assert_abs_diff_eq!(sq.metric_speed(&e, 0.5).unwrap(), 1.0, epsilon = 2e-3);
        assert_abs_diff_eq!(sq.length(&e), 1.0, epsilon = 1e-12);
        let g = MetricGraph::tripod();
        let path = SampledCurve::new(vec![0.0, 0.5, 1.0], vec![GraphPoint::Node(1), GraphPoint::Node(0), GraphPoint::Node(2)]).unwrap();
        assert_abs_diff_eq!(path.metric_speed(&g, 0.3).unwrap(), 2.0);
        assert_abs_diff_eq!(path.length(&g), 2.0);
    }

    #[test]
    fn dual_speed_matches() {
        let e = plane();
        let arc = SampledCurve::from_fn(200, |t| pt(t.cos(), t.sin())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 0.4321;
        let lm = arc.landmarks(&e, t, 30, &mut rng).unwrap();
        let s = arc.metric_speed(&e, t).unwrap();
        assert!((arc.dual_speed(&e, t, &lm).unwrap() - s).abs() <= 5e-2 * (1.0 + s));
        assert!(arc.dual_speed(&e, t, &lm).unwrap() <= s + 1e-9);
    }

    #[test]
    fn reparametrization() {
        let e = plane();
        let sq = SampledCurve::from_fn(50, |t| pt(t * t, 0.0)).unwrap();
        let c = sq.const_speed_reparam(&e).unwrap();
        for &s in &[0.1, 0.37, 0.9] {
            assert_abs_diff_eq!(c.eval(&e, s).unwrap().coords()[0], s, epsilon = 1e-12);
        }
        for sp in c.speed_profile(&e).speeds {
            assert_abs_diff_eq!(sp, 1.0, epsilon = 1e-10);
        }
        assert_eq!(c.const_speed_reparam(&e).unwrap(), c);
        // plateau in the middle
        let p = SampledCurve::new(vec![0.0, 0.2, 0.8, 1.0], vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(1.0, 0.0), pt(2.0, 0.0)]).unwrap();
        let q = p.const_speed_reparam(&e).unwrap();
        assert_eq!(q.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(q.length(&e), p.length(&e));
        let flat = SampledCurve::uniform(vec![pt(1.0, 1.0), pt(1.0, 1.0)]).unwrap();
        assert_eq!(flat.const_speed_reparam(&e), Err(Error::ConstantCurve));
    }

    #[test]
    fn class_distance() {
        let e = plane();
        let a = SampledCurve::from_fn(40, |t| pt(t, t * t)).unwrap();
        let b = SampledCurve::from_fn(40, |t| pt(t.powi(3), t.powi(6))).unwrap();
        let c = a.const_speed_reparam(&e).unwrap();
        assert!(curve_class_distance(&e, &a, &c).unwrap() <= 1e-9);
        // b follows a's chords only approximately; its trace is the same parabola
        assert!(curve_class_distance(&e, &a, &b).unwrap() <= 2e-3);
        let h = 0.3;
        let u = SampledCurve::uniform(vec![pt(0.0, 0.0), pt(1.0, 0.0)]).unwrap();
        let w = SampledCurve::new(vec![0.0, 0.9, 1.0], vec![pt(0.0, h), pt(0.2, h), pt(1.0, h)]).unwrap();
        assert_abs_diff_eq!(curve_class_distance(&e, &u, &w).unwrap(), h, epsilon = 1e-12);
    }

    #[test]
    fn derivatives() {
        let e = plane();
        let seg = SampledCurve::uniform(vec![pt(0.0, 0.0), pt(2.0, 0.0)]).unwrap();
        let r = seg.right_derivative(&e, 0.25).unwrap();
        assert_abs_diff_eq!(crate::tangent::norm(&e, &r), 2.0, epsilon = 1e-12);
        assert!(seg.check_antipodality(&e, 0.6).unwrap().defect <= 1e-8);
        let g = MetricGraph::tripod();
        let path = SampledCurve::new(vec![0.0, 0.5, 1.0], vec![GraphPoint::Node(1), GraphPoint::Node(0), GraphPoint::Node(2)]).unwrap();
        let r = path.right_derivative(&g, 0.2).unwrap();
        assert_eq!(r.target, GraphPoint::Node(0));
        assert_abs_diff_eq!(crate::tangent::norm(&g, &r), 2.0, epsilon = 1e-12);
        assert!(matches!(path.right_derivative(&g, 0.5), Err(Error::KnotPoint { .. })));
        // through the hub the path is still a geodesic, so even the knot is antipodal
        let k = path.check_antipodality(&g, 0.5).unwrap();
        assert!(k.at_knot && k.defect < 1e-12);
    }

    #[test]
    fn corner_is_flagged() {
        let e = plane();
        let corner = SampledCurve::uniform(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(1.0, 1.0)]).unwrap();
        let k = corner.check_antipodality(&e, 0.5).unwrap();
        assert!(k.at_knot);
        assert_abs_diff_eq!(k.defect, 2f64.sqrt() * 2.0, epsilon = 1e-8);
        let arc = SampledCurve::from_fn(400, |t| pt(t.cos(), t.sin())).unwrap();
        let a = arc.check_antipodality(&e, 0.3337).unwrap();
        assert!(!a.at_knot && a.defect <= 1e-6);
    }

    #[test]
    fn chain_rule_on_circle() {
        let e = plane();
        let arc = SampledCurve::from_fn(400, |t| pt(t.cos(), t.sin())).unwrap();
        let o = e.origin();
        let t = 0.51234;
        assert!(arc.chain_rule_defect(&e, t, |p| e.dist(&o, p), 0.0).unwrap() <= 1e-7);
        let f = |p: &crate::model::ModelPoint| e.dist(&pt(3.0, -1.0), p);
        assert!(arc.chain_rule_defect(&e, t, f, 0.0).unwrap() <= 1e-7);
        assert!(arc.angle_condition(&e, t, 10).unwrap() < 1e-4);
    }

    #[test]
    fn json_round_trip() {
        let e = plane();
        let c = SampledCurve::from_fn(3, |t| pt(t, 2.0 * t)).unwrap();
        assert_eq!(SampledCurve::from_json(&e, &c.to_json(&e)).unwrap(), c);
        assert!(SampledCurve::<crate::model::ModelPoint>::new(vec![0.0, 0.7, 0.5, 1.0], vec![pt(0.0, 0.0); 4]).is_err());
    }
}
