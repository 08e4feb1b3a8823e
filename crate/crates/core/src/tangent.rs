//! Tangent-cone arithmetic at a point, computed from blow-up limits of geodesics.

use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::limits::{limit, quotient_limit, LimitEstimate};
use crate::model::comparison_cosine;
use crate::space::GeodesicSpace;

/// λ·(G_x^y)'₀, the initial velocity of the geodesic from x to y scaled by λ.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<P> {
    pub base: P,
    pub target: P,
    pub scale: f64,
}

impl<P: Clone> TangentVector<P> {
    pub fn new(base: P, target: P, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::PreconditionFailed(format!("scale {scale} must be non-negative")));
        }
        Ok(TangentVector { base, target, scale })
    }

    pub fn zero(base: P) -> Self {
        TangentVector { target: base.clone(), base, scale: 0.0 }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        assert!(lambda >= 0.0, "cone scalars are non-negative");
        TangentVector { base: self.base.clone(), target: self.target.clone(), scale: self.scale * lambda }
    }
}

pub fn norm<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>) -> f64 {
    v.scale * space.dist(&v.base, &v.target)
}

fn is_zero<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>) -> bool {
    norm(space, v) == 0.0
}

/// Largest parameter for which the representing curve stays on its geodesic and
/// inside the CAT ball.
fn t_max<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>) -> f64 {
    let n = norm(space, v);
    if n == 0.0 {
        return f64::INFINITY;
    }
    (1.0 / v.scale).min(space.cat_radius(&v.base) / n)
}

/// γ_t = G_x^y(λt).
fn point_at<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, t: f64) -> Result<S::Point> {
    if v.scale == 0.0 {
        return Ok(v.base.clone());
    }
    space.geodesic(&v.base, &v.target, v.scale * t)
}

fn same_base<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Result<()> {
    if space.dist(&v.base, &w.base) > 0.0 {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

fn start<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> f64 {
    t_max(space, v).min(t_max(space, w)) / 8.0
}

/// d_x(v, w) = lim d(γ_t, η_t)/t.
pub fn cone_metric<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Result<LimitEstimate> {
    same_base(space, v, w)?;
    if is_zero(space, v) || is_zero(space, w) {
        let value = norm(space, v).max(norm(space, w));
        return Ok(LimitEstimate { value, error_bound: 0.0, steps_used: Vec::new() });
    }
    limit(start(space, v, w), |t| Ok(space.dist(&point_at(space, v, t)?, &point_at(space, w, t)?) / t))
}

pub fn scalar_product<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Result<f64> {
    if is_zero(space, v) || is_zero(space, w) {
        same_base(space, v, w)?;
        return Ok(0.0);
    }
    let d = cone_metric(space, v, w)?.value;
    let (a, b) = (norm(space, v), norm(space, w));
    Ok(0.5 * (a * a + b * b - d * d))
}

/// Angle between v and w as the limit of κ-comparison angles, extrapolated through
/// their cosines.
pub fn angle<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Result<LimitEstimate> {
    same_base(space, v, w)?;
    if is_zero(space, v) || is_zero(space, w) {
        return Err(Error::DegenerateVertex);
    }
    let kappa = space.curvature_bound();
    let x = &v.base;
    let est = limit(start(space, v, w), |t| {
        let (p, q) = (point_at(space, v, t)?, point_at(space, w, t)?);
        comparison_cosine(kappa, space.dist(x, &p), space.dist(x, &q), space.dist(&p, &q))
    })?;
    let value = est.value.clamp(-1.0, 1.0).acos();
    Ok(LimitEstimate { value, ..est })
}

/// Closed-form angle where the space provides one.
pub fn exact_angle<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Option<f64> {
    if is_zero(space, v) || is_zero(space, w) {
        return None;
    }
    space.angle_at(&v.base, &v.target, &w.target)
}

pub fn exact_cone_metric<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Option<f64> {
    let (a, b) = (norm(space, v), norm(space, w));
    if a == 0.0 || b == 0.0 {
        return Some(a.max(b));
    }
    let th = exact_angle(space, v, w)?;
    Some((a * a + b * b - 2.0 * a * b * th.cos()).max(0.0).sqrt())
}

pub fn exact_oplus_norm<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, w: &TangentVector<S::Point>) -> Option<f64> {
    let (a, b) = (norm(space, v), norm(space, w));
    if a == 0.0 || b == 0.0 {
        return Some(a.max(b));
    }
    let th = exact_angle(space, v, w)?;
    Some((a * a + b * b + 2.0 * a * b * th.cos()).max(0.0).sqrt())
}

/// An element of the tangent cone: a geodesic direction, or `factor·(v ⊕ w)` realised by
/// the curve t ↦ midpoint(γ_{2·factor·t}, η_{2·factor·t}).
#[derive(Clone, Debug, PartialEq)]
pub enum Tangent<P> {
    Vector(TangentVector<P>),
    Sum { v: TangentVector<P>, w: TangentVector<P>, factor: f64 },
}

pub fn oplus<P: Clone>(v: &TangentVector<P>, w: &TangentVector<P>) -> Tangent<P> {
    Tangent::Sum { v: v.clone(), w: w.clone(), factor: 1.0 }
}

impl<P: Clone> Tangent<P> {
    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            Tangent::Vector(v) => Tangent::Vector(v.scaled(lambda)),
            Tangent::Sum { v, w, factor } => Tangent::Sum { v: v.clone(), w: w.clone(), factor: factor * lambda },
        }
    }

    fn base(&self) -> &P {
        match self {
            Tangent::Vector(v) | Tangent::Sum { v, .. } => &v.base,
        }
    }
}

impl<P: Clone> From<TangentVector<P>> for Tangent<P> {
    fn from(v: TangentVector<P>) -> Self {
        Tangent::Vector(v)
    }
}

fn element_at<S: GeodesicSpace>(space: &S, e: &Tangent<S::Point>, t: f64) -> Result<S::Point> {
    match e {
        Tangent::Vector(v) => point_at(space, v, t),
        Tangent::Sum { v, w, factor } => {
            same_base(space, v, w)?;
            let s = 2.0 * factor * t;
            space.midpoint(&point_at(space, v, s)?, &point_at(space, w, s)?)
        }
    }
}

fn element_t_max<S: GeodesicSpace>(space: &S, e: &Tangent<S::Point>) -> f64 {
    match e {
        Tangent::Vector(v) => t_max(space, v),
        Tangent::Sum { factor, .. } if *factor == 0.0 => f64::INFINITY,
        Tangent::Sum { v, w, factor } => t_max(space, v).min(t_max(space, w)) / (2.0 * factor),
    }
}

/// lim d(a_t, b_t)/t for the curves realising two tangent elements. For sums this is the
/// blow-up form of the midpoint limit, evaluated on one diagonal sequence.
pub fn tangent_distance<S: GeodesicSpace>(space: &S, a: &Tangent<S::Point>, b: &Tangent<S::Point>) -> Result<f64> {
    if space.dist(a.base(), b.base()) > 0.0 {
        return Err(Error::SpaceMismatch);
    }
    if let (Tangent::Vector(v), Tangent::Vector(w)) = (a, b) {
        return Ok(cone_metric(space, v, w)?.value);
    }
    let t0 = element_t_max(space, a).min(element_t_max(space, b));
    if t0.is_infinite() {
        return Ok(0.0);
    }
    Ok(limit(t0 / 8.0, |t| Ok(space.dist(&element_at(space, a, t)?, &element_at(space, b, t)?) / t))?.value)
}

pub fn tangent_norm<S: GeodesicSpace>(space: &S, a: &Tangent<S::Point>) -> Result<f64> {
    match a {
        Tangent::Vector(v) => Ok(norm(space, v)),
        _ => tangent_distance(space, a, &Tangent::Vector(TangentVector::zero(a.base().clone()))),
    }
}

pub fn tangent_product<S: GeodesicSpace>(space: &S, a: &Tangent<S::Point>, b: &Tangent<S::Point>) -> Result<f64> {
    let (na, nb) = (tangent_norm(space, a)?, tangent_norm(space, b)?);
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let d = tangent_distance(space, a, b)?;
    Ok(0.5 * (na * na + nb * nb - d * d))
}

/// ⟨v, η'₀⟩ for the geodesic η from x to `eta_target`, by the first variation formula.
pub fn first_variation<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, eta_target: &S::Point) -> Result<f64> {
    let len = space.dist(&v.base, eta_target);
    if len == 0.0 {
        return Err(Error::PreconditionFailed("geodesic target coincides with the base point".into()));
    }
    if len >= space.curvature_bound().diam() {
        return Err(Error::AntipodalPoints { dist: len });
    }
    Ok(-len * d_dist(space, eta_target, v)?)
}

/// Differential of d(·, y) at the base of v.
pub fn d_dist<S: GeodesicSpace>(space: &S, y: &S::Point, v: &TangentVector<S::Point>) -> Result<f64> {
    let x = &v.base;
    let d0 = space.dist(x, y);
    if d0 == 0.0 || is_zero(space, v) {
        return Ok(norm(space, v));
    }
    let t0 = t_max(space, v).min(d0 / norm(space, v)) / 8.0;
    Ok(quotient_limit(t0, d0, |t| Ok((space.dist(&point_at(space, v, t)?, y) - d0) / t))?.value)
}

/// d_x f(v) for f Lipschitz and K-semiconvex near x. Difference quotients are checked
/// to decrease as h ↓ 0 up to the K|v|²-term.
pub fn differential<S, F>(space: &S, f: F, semiconvexity: f64, v: &TangentVector<S::Point>) -> Result<f64>
where
    S: GeodesicSpace,
    F: Fn(&S::Point) -> f64,
{
    if is_zero(space, v) {
        return Ok(0.0);
    }
    let f0 = f(&v.base);
    let n2 = norm(space, v).powi(2);
    let mut prev: Option<(f64, f64)> = None;
    let mut excess: f64 = 0.0;
    let est = quotient_limit(t_max(space, v) / 8.0, f0, |h| {
        let q = (f(&point_at(space, v, h)?) - f0) / h;
        if let Some((hp, qp)) = prev {
            excess = excess.max(q - qp - 0.5 * semiconvexity.max(0.0) * n2 * (hp - h));
        }
        prev = Some((h, q));
        Ok(q)
    })?;
    if excess > 1e-9 {
        return Err(Error::NotSemiconvex { excess });
    }
    Ok(est.value)
}

/// sup over the given points of −d_dist(y, x, v), which approaches |v| as the points fill
/// a neighbourhood of x.
pub fn norm_recovery<S: GeodesicSpace>(space: &S, v: &TangentVector<S::Point>, ys: &[S::Point]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for y in ys {
        if space.dist(&v.base, y) > 0.0 {
            best = best.max(-d_dist(space, y, v)?);
        }
    }
    Ok(best)
}

/// A random tangent vector at x with target inside half the CAT radius.
pub fn random_tangent<S: GeodesicSpace, R: Rng + ?Sized>(space: &S, x: &S::Point, rng: &mut R) -> TangentVector<S::Point> {
    if rng.random::<f64>() < 0.05 {
        return TangentVector::zero(x.clone());
    }
    let radius = (space.cat_radius(x) / 2.0).min(1.5);
    let y = space.sample_near(x, radius, rng);
    TangentVector { base: x.clone(), target: y, scale: rng.random_range(0.2..2.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphPoint, MetricGraph};
    use crate::model::ModelSpace;
    use approx::assert_abs_diff_eq;

    fn unit_tripod() -> MetricGraph {
        MetricGraph::from_named(&["o", "a", "b", "c"], &[("o", "a", 1.0), ("o", "b", 1.0), ("o", "c", 1.0)]).unwrap()
    }

    #[test]
    fn euclidean_examples() {
        let e = ModelSpace::new(0.0);
        let o = e.origin();
        let e1 = TangentVector::new(o, e.point(&[1.0, 0.0]).unwrap(), 1.0).unwrap();
        let e2 = TangentVector::new(o, e.point(&[0.0, 1.0]).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(cone_metric(&e, &e1, &e2).unwrap().value, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(cone_metric(&e, &e1, &e1).unwrap().value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scalar_product(&e, &e1, &e2).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scalar_product(&e, &e1, &e1).unwrap(), 1.0, epsilon = 1e-12);
        let s = oplus(&e1, &e2);
        assert_abs_diff_eq!(tangent_norm(&e, &s).unwrap(), 2f64.sqrt(), epsilon = 1e-10);
        let diag = TangentVector::new(o, e.point(&[1.0, 1.0]).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(tangent_distance(&e, &s, &diag.into()).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(first_variation(&e, &e1, &e.point(&[0.0, 1.0]).unwrap()).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(first_variation(&e, &e1, &e.point(&[1.0, 0.0]).unwrap()).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d_dist(&e, &e.point(&[1.0, 0.0]).unwrap(), &e1).unwrap(), -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d_dist(&e, &o, &e1.scaled(3.0)).unwrap(), 3.0);
    }

    #[test]
    fn oplus_with_zero() {
        let h = ModelSpace::new(-1.0);
        let x = h.polar(0.4, 0.3);
        let v = TangentVector::new(x, h.polar(1.0, 1.0), 1.3).unwrap();
        let u = TangentVector::new(x, h.polar(0.9, 2.0), 0.7).unwrap();
        let s = oplus(&v, &TangentVector::zero(x));
        assert_abs_diff_eq!(tangent_norm(&h, &s).unwrap(), norm(&h, &v), epsilon = 1e-8);
        let p1 = tangent_product(&h, &s, &u.clone().into()).unwrap();
        assert_abs_diff_eq!(p1, scalar_product(&h, &v, &u).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn tripod_hub_examples() {
        let g = unit_tripod();
        let hub = GraphPoint::Node(0);
        let a = TangentVector::new(hub, GraphPoint::Node(1), 1.0).unwrap();
        let b = TangentVector::new(hub, GraphPoint::Node(2), 1.0).unwrap();
        assert_abs_diff_eq!(cone_metric(&g, &a, &b).unwrap().value, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scalar_product(&g, &a, &b).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tangent_norm(&g, &oplus(&a, &b)).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(first_variation(&g, &a, &GraphPoint::Node(2)).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d_dist(&g, &GraphPoint::Node(1), &b).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angle(&g, &a, &b).unwrap().value, std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn differential_examples() {
        let e = ModelSpace::new(0.0);
        let x = e.point(&[1.0, 0.0]).unwrap();
        let v = TangentVector::new(x, e.point(&[2.0, 0.0]).unwrap(), 1.0).unwrap();
        let o = e.origin();
        assert_abs_diff_eq!(differential(&e, |p| e.dist(&o, p), 0.0, &v).unwrap(), 1.0, epsilon = 1e-10);
        assert_eq!(differential(&e, |_| 4.0, 0.0, &v).unwrap(), 0.0);
        let w = TangentVector::new(x, e.point(&[1.3, 0.8]).unwrap(), 2.0).unwrap();
        assert_abs_diff_eq!(differential(&e, |p| e.dist(&x, p), 0.0, &w).unwrap(), norm(&e, &w), epsilon = 1e-10);
        let d1 = differential(&e, |p| e.dist(&o, p), 0.0, &w).unwrap();
        let d3 = differential(&e, |p| e.dist(&o, p), 0.0, &w.scaled(3.0)).unwrap();
        assert_abs_diff_eq!(d3, 3.0 * d1, epsilon = 1e-8);
        // concave along the curve: quotients increase as h shrinks
        let r = differential(&e, |p| -e.dist(&e.point(&[1.0, 1.0]).unwrap(), p).powi(2) * 10.0, 0.0, &w);
        assert!(matches!(r, Err(Error::NotSemiconvex { .. })));
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let e = ModelSpace::new(0.0);
        let v = TangentVector::new(e.origin(), e.point(&[1.0, 0.0]).unwrap(), 1.0).unwrap();
        let w = TangentVector::new(e.point(&[0.0, 1.0]).unwrap(), e.point(&[1.0, 0.0]).unwrap(), 1.0).unwrap();
        assert_eq!(cone_metric(&e, &v, &w), Err(Error::SpaceMismatch));
    }

    #[test]
    fn sphere_matches_closed_form() {
        let s = ModelSpace::new(1.0);
        let x = s.polar(0.3, 0.1);
        let v = TangentVector::new(x, s.polar(1.0, 0.7), 1.5).unwrap();
        let w = TangentVector::new(x, s.polar(0.9, 2.4), 0.6).unwrap();
        let exact = exact_cone_metric(&s, &v, &w).unwrap();
        assert_abs_diff_eq!(cone_metric(&s, &v, &w).unwrap().value, exact, epsilon = 1e-9);
        assert_abs_diff_eq!(tangent_norm(&s, &oplus(&v, &w)).unwrap(), exact_oplus_norm(&s, &v, &w).unwrap(), epsilon = 1e-8);
        let th = angle(&s, &v, &w).unwrap().value;
        assert_abs_diff_eq!(th, exact_angle(&s, &v, &w).unwrap(), epsilon = 1e-8);
    }
}
