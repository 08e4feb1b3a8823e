//! Barycenters of finitely supported measures on CAT(0) spaces, with certificates.

use rand::seq::SliceRandom;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::par::sample_rng;
use crate::space::GeodesicSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<P> {
    atoms: Vec<(P, f64)>,
}

impl<P: Clone> DiscreteMeasure<P> {
    pub fn new(atoms: Vec<(P, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Invalid("a measure needs at least one atom".into()));
        }
        if atoms.iter().any(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid("atom weights must be positive and finite".into()));
        }
        Ok(DiscreteMeasure { atoms })
    }

    pub fn uniform(points: Vec<P>) -> Result<Self> {
        DiscreteMeasure::new(points.into_iter().map(|p| (p, 1.0)).collect())
    }

    pub fn atoms(&self) -> &[(P, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn normalized(&self) -> Self {
        let m = self.total_mass();
        DiscreteMeasure { atoms: self.atoms.iter().map(|(p, w)| (p.clone(), w / m)).collect() }
    }

    /// ∫ f dμ for the normalized measure.
    pub fn integrate(&self, f: impl Fn(&P) -> f64) -> f64 {
        self.atoms.iter().map(|(p, w)| w * f(p)).sum::<f64>() / self.total_mass()
    }

    pub fn map<Q: Clone>(&self, f: impl Fn(&P) -> Q) -> DiscreteMeasure<Q> {
        DiscreteMeasure { atoms: self.atoms.iter().map(|(p, w)| (f(p), *w)).collect() }
    }

    /// `{"atoms":[{"point":..,"weight":..}]}`
    pub fn to_json<S: GeodesicSpace<Point = P>>(&self, space: &S) -> Value {
        json!({ "atoms": self.atoms.iter().map(|(p, w)| json!({"point": space.point_to_json(p), "weight": w})).collect::<Vec<_>>() })
    }

    pub fn from_json<S: GeodesicSpace<Point = P>>(space: &S, v: &Value) -> Result<Self> {
        let atoms = v
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Invalid("measure needs 'atoms'".into()))?
            .iter()
            .map(|a| {
                let p = space.point_from_json(a.get("point").ok_or_else(|| Error::Invalid("atom needs 'point'".into()))?)?;
                let w = a.get("weight").map_or(Some(1.0), Value::as_f64).ok_or_else(|| Error::Invalid("non-numeric weight".into()))?;
                Ok((p, w))
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(atoms)
    }
}

/// F(q) = ∫ d²(·,q) dμ.
pub fn second_moment<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, q: &S::Point) -> f64 {
    mu.integrate(|x| space.dist(x, q).powi(2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarycenterResult<P> {
    #[serde(skip)]
    pub point: P,
    /// F(point) − inf F, bounded from the final descent test
    pub gap_bound: f64,
    pub iterations: usize,
    pub closed_form: bool,
    /// distance from the inductive-means estimate to the returned point
    pub inductive_distance: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_passes: usize,
    /// passes without 1e-12 relative descent before giving up
    pub stall_passes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, seed: 0, max_passes: 2000, stall_passes: 200 }
    }
}

/// Cyclic inductive means over shuffled passes; returns the estimate and the pass count.
pub fn inductive_mean<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, opts: &SolverOptions) -> Result<(S::Point, usize)> {
    let mut rng = sample_rng(opts.seed, 0);
    let mut order: Vec<usize> = (0..mu.atoms.len()).collect();
    let mut b = mu.atoms[0].0.clone();
    let mut acc = 0.0;
    let mut best = f64::INFINITY;
    let mut since = 0;
    let mut passes = 0;
    while passes < opts.max_passes {
        order.shuffle(&mut rng);
        for &k in &order {
            let (x, w) = &mu.atoms[k];
            acc += w;
            b = space.geodesic(&b, x, w / acc)?;
        }
        passes += 1;
        let f = second_moment(space, mu, &b);
        if f < best * (1.0 - 1e-12) {
            best = f;
            since = 0;
        } else {
            since += 1;
            if since >= opts.stall_passes {
                break;
            }
        }
    }
    Ok((b, passes))
}

/// Largest decrease of F found by stepping from p toward each atom; zero at the minimizer
/// up to rounding.
pub fn descent_gap<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, p: &S::Point) -> Result<f64> {
    let f0 = second_moment(space, mu, p);
    let mut gap: f64 = 0.0;
    for (x, _) in &mu.atoms {
        let d = space.dist(p, x);
        if d == 0.0 {
            continue;
        }
        for s in [1e-1, 1e-2, 1e-3, 1e-4] {
            let q = space.geodesic(p, x, (s / d).min(1.0))?;
            gap = gap.max(f0 - second_moment(space, mu, &q));
        }
    }
    Ok(gap)
}

/// Bar(μ) on a CAT(0) space. Closed forms are used where the space has one; otherwise
/// inductive means, accepted once the descent gap is below tol².
pub fn solve_barycenter<S: GeodesicSpace>(
    space: &S,
    mu: &DiscreteMeasure<S::Point>,
    opts: &SolverOptions,
) -> Result<BarycenterResult<S::Point>> {
    let k = space.curvature_bound().value();
    if k > 0.0 {
        return Err(Error::NotCat0 { kappa: k });
    }
    let mu = mu.normalized();
    let (ind, passes) = inductive_mean(space, &mu, opts)?;
    match space.exact_barycenter(mu.atoms()) {
        Some(exact) => {
            let p = exact?;
            Ok(BarycenterResult {
                gap_bound: descent_gap(space, &mu, &p)?,
                iterations: passes,
                closed_form: true,
                inductive_distance: space.dist(&ind, &p),
                point: p,
            })
        }
        None => {
            let gap = descent_gap(space, &mu, &ind)?;
            if gap > opts.tol * opts.tol {
                return Err(Error::NonConvergence { gap });
            }
            Ok(BarycenterResult { point: ind, gap_bound: gap, iterations: passes, closed_form: false, inductive_distance: 0.0 })
        }
    }
}

/// min over probes p of ∫[d²(·,p) − d²(·,bar)]dμ − d²(p,bar).
pub fn variance_certificate<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, bar: &S::Point, probes: &[S::Point]) -> f64 {
    let fb = second_moment(space, mu, bar);
    probes
        .iter()
        .map(|p| second_moment(space, mu, p) - fb - space.dist(p, bar).powi(2))
        .fold(f64::INFINITY, f64::min)
}

/// ∫φ dμ − φ(bar). φ is first checked for convexity along the geodesics from bar to
/// the atoms and between consecutive atoms.
pub fn jensen_check<S, F>(space: &S, mu: &DiscreteMeasure<S::Point>, phi: F, bar: &S::Point) -> Result<f64>
where
    S: GeodesicSpace,
    F: Fn(&S::Point) -> f64,
{
    let mut pairs: Vec<(&S::Point, &S::Point)> = mu.atoms.iter().map(|(x, _)| (bar, x)).collect();
    pairs.extend(mu.atoms.windows(2).map(|w| (&w[0].0, &w[1].0)));
    for (a, b) in pairs {
        let (fa, fb) = (phi(a), phi(b));
        for j in 1..8 {
            let t = j as f64 / 8.0;
            let excess = phi(&space.geodesic(a, b, t)?) - ((1.0 - t) * fa + t * fb);
            if excess > 1e-12 * (1.0 + fa.abs() + fb.abs()) {
                return Err(Error::NotConvex { excess });
            }
        }
    }
    Ok(mu.integrate(&phi) - phi(bar))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rigidity {
    pub triggered: bool,
    /// max over atoms of |d(x,Bar) − |d(x,p) − d(Bar,p)||, plus the pairwise ray
    /// defect when the space is non-branching from p
    pub halfline_defect: f64,
}

pub fn rigidity_check<S: GeodesicSpace>(space: &S, mu: &DiscreteMeasure<S::Point>, bar: &S::Point, p: &S::Point, tol: f64) -> Rigidity {
    let dbp = space.dist(bar, p);
    let mean = mu.integrate(|x| space.dist(x, p));
    if dbp < mean - tol {
        return Rigidity { triggered: false, halfline_defect: 0.0 };
    }
    let mut defect: f64 = 0.0;
    for (x, _) in &mu.atoms {
        defect = defect.max((space.dist(x, bar) - (space.dist(x, p) - dbp).abs()).abs());
    }
    if space.is_nonbranching_from(p) == Some(true) {
        for (x, _) in &mu.atoms {
            for (y, _) in &mu.atoms {
                defect = defect.max((space.dist(x, y) - (space.dist(x, p) - space.dist(y, p)).abs()).abs());
            }
        }
    }
    Rigidity { triggered: true, halfline_defect: defect }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::EuclideanCone;
    use crate::graph::{GraphPoint, MetricGraph};
    use crate::model::ModelSpace;
    use approx::assert_abs_diff_eq;

    fn tripod_measure() -> DiscreteMeasure<GraphPoint> {
        DiscreteMeasure::uniform((1..4).map(GraphPoint::Node).collect()).unwrap()
    }

    #[test]
    fn euclidean_two_atoms() {
        let e = ModelSpace::new(0.0);
        let mu = DiscreteMeasure::uniform(vec![e.point(&[0.0, 0.0]).unwrap(), e.point(&[2.0, 0.0]).unwrap()]).unwrap();
        let r = solve_barycenter(&e, &mu, &SolverOptions::default()).unwrap();
        assert_eq!(r.point.coords(), vec![1.0, 0.0]);
        let probes = [e.point(&[3.0, -1.0]).unwrap(), e.point(&[0.5, 7.0]).unwrap()];
        assert_abs_diff_eq!(variance_certificate(&e, &mu, &r.point, &probes), 0.0, epsilon = 1e-12);
        assert_eq!(variance_certificate(&e, &mu, &r.point, &[r.point]), 0.0);
    }

    #[test]
    fn tripod_hub() {
        let g = MetricGraph::tripod();
        let mu = tripod_measure();
        let r = solve_barycenter(&g, &mu, &SolverOptions::default()).unwrap();
        assert_eq!(r.point, GraphPoint::Node(0));
        // inductive means reach the hub on their own, at a sublinear rate
        assert!(r.inductive_distance < 1e-2);
        let a = GraphPoint::Node(1);
        assert_abs_diff_eq!(variance_certificate(&g, &mu, &r.point, &[a]), 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(jensen_check(&g, &mu, |x| g.dist(x, &a), &r.point).unwrap(), 4.0 / 3.0 - 1.0, epsilon = 1e-14);
        assert_eq!(jensen_check(&g, &mu, |_| 2.5, &r.point).unwrap(), 0.0);
        assert!(!rigidity_check(&g, &mu, &r.point, &a, 1e-9).triggered);
    }

    #[test]
    fn weighted_segment() {
        let seg = MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)]).unwrap();
        let mu = DiscreteMeasure::new(vec![(GraphPoint::Node(0), 0.7), (GraphPoint::Node(1), 0.3)]).unwrap();
        let r = solve_barycenter(&seg, &mu, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(seg.dist(&r.point, &GraphPoint::Node(0)), 0.3, epsilon = 1e-12);
        // unnormalized input gives the same answer
        let mu2 = DiscreteMeasure::new(vec![(GraphPoint::Node(0), 7.0), (GraphPoint::Node(1), 3.0)]).unwrap();
        assert_eq!(solve_barycenter(&seg, &mu2, &SolverOptions::default()).unwrap().point, r.point);
    }

    #[test]
    fn sphere_is_refused() {
        let s = ModelSpace::new(1.0);
        let mu = DiscreteMeasure::uniform(vec![s.polar(0.1, 0.0), s.polar(0.2, 1.0)]).unwrap();
        assert!(matches!(solve_barycenter(&s, &mu, &SolverOptions::default()), Err(Error::NotCat0 { .. })));
    }

    #[test]
    fn rigidity_on_rays() {
        let c = EuclideanCone::spider(3);
        let apex = crate::cone::ConePoint::apex();
        let mu = DiscreteMeasure::new(vec![(c.point(1.0, 0), 1.0), (c.point(3.0, 0), 2.0)]).unwrap();
        let r = solve_barycenter(&c, &mu, &SolverOptions::default()).unwrap();
        let rig = rigidity_check(&c, &mu, &r.point, &apex, 1e-9);
        assert!(rig.triggered && rig.halfline_defect <= 1e-12);
        // scaling along rays
        let scaled = mu.map(|p| c.scale(2.5, p));
        let rs = solve_barycenter(&c, &scaled, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(c.dist(&rs.point, &c.scale(2.5, &r.point)), 0.0, epsilon = 1e-12);

        let e = ModelSpace::new(0.0);
        let p = e.point(&[0.0, 0.0]).unwrap();
        let mu = DiscreteMeasure::uniform(vec![e.point(&[1.0, 1.0]).unwrap(), e.point(&[2.0, 2.0]).unwrap()]).unwrap();
        let b = solve_barycenter(&e, &mu, &SolverOptions::default()).unwrap().point;
        let rig = rigidity_check(&e, &mu, &b, &p, 1e-9);
        assert!(rig.triggered && rig.halfline_defect <= 1e-10);
    }

    #[test]
    fn not_convex_is_caught() {
        let e = ModelSpace::new(0.0);
        let mu = DiscreteMeasure::uniform(vec![e.point(&[-1.0, 0.0]).unwrap(), e.point(&[1.0, 0.0]).unwrap()]).unwrap();
        let bar = e.origin();
        let concave = |p: &crate::model::ModelPoint| -p.coords()[0].powi(2);
        assert!(matches!(jensen_check(&e, &mu, concave, &bar), Err(Error::NotConvex { .. })));
    }

    #[test]
    fn json_round_trip() {
        let g = MetricGraph::tripod();
        let mu = DiscreteMeasure::new(vec![(GraphPoint::Node(1), 0.5), (g.on_edge(0, 0.25), 2.0)]).unwrap();
        assert_eq!(DiscreteMeasure::from_json(&g, &mu.to_json(&g)).unwrap(), mu);
    }
}
