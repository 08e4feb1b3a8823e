//! The map from derivations on a metric graph to sections of its tangent bundle:
//! superposition, exact disintegration along edges, right derivatives of the paths and
//! fibrewise barycenters.

use serde::Serialize;

use crate::barycenter::{rigidity_check, solve_barycenter, DiscreteMeasure, SolverOptions};
use crate::cone::{ConePoint, EuclideanCone};
use crate::error::{Error, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::par::map_indices;
use crate::report::{Report, Worst};
use crate::space::GeodesicSpace;
use crate::tangent::{cone_metric, d_dist, norm, oplus, tangent_distance, TangentVector};
use crate::transport::{apply, derivation_norm, derivation_norm_22, superpose, DistFn, EdgeFlow, EdgeFn, PathDecomposition, TieBreak, WeightedGraph};

/// Fibre direction toward the stored `b` end of the edge.
pub const FORWARD: usize = 0;
/// Fibre direction toward the stored `a` end of the edge.
pub const BACKWARD: usize = 1;

/// The tangent cone at an edge-interior point: two half-lines glued at 0.
pub fn fibre() -> EuclideanCone {
    EuclideanCone::spider(2)
}

/// `per_edge` interior points of every edge at offsets len·j/(per_edge+1).
pub fn grid(g: &MetricGraph, per_edge: usize) -> Vec<GraphPoint> {
    let mut out = Vec::with_capacity(per_edge * g.edges().len());
    for (k, e) in g.edges().iter().enumerate() {
        for j in 1..=per_edge {
            out.push(g.on_edge(k, e.len * j as f64 / (per_edge + 1) as f64));
        }
    }
    out
}

/// One grid point of a section: the fibre vector and the disintegration data behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FibreValue {
    #[serde(skip)]
    pub x: GraphPoint,
    #[serde(skip)]
    pub v: ConePoint,
    /// dν/dμ at x
    pub density_ratio: f64,
    pub atoms: usize,
    pub rigidity_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentSection {
    pub values: Vec<FibreValue>,
}

impl TangentSection {
    /// Signed fibre coordinate: positive toward the edge's `b` end.
    pub fn signed(&self, i: usize) -> f64 {
        let v = &self.values[i].v;
        if v.dir == GraphPoint::Node(FORWARD) {
            v.r
        } else {
            -v.r
        }
    }
}

/// The fibre vector at x as a tangent vector of the graph, pointing at a nearby point
/// of the same edge.
pub fn to_tangent(g: &MetricGraph, x: &GraphPoint, v: &ConePoint) -> Result<TangentVector<GraphPoint>> {
    let GraphPoint::Edge { edge, offset } = *x else { return Err(Error::NodePoint) };
    if v.r == 0.0 {
        return Ok(TangentVector::zero(*x));
    }
    let len = g.edges()[edge].len;
    let step = 0.5 * offset.min(len - offset);
    let forward = v.dir == GraphPoint::Node(FORWARD);
    let target = g.on_edge(edge, if forward { offset + step } else { offset - step });
    TangentVector::new(*x, target, v.r / step)
}

/// n_x: atoms at the right derivatives of the paths through x, weighted by their time
/// density w/L there; returns the measure and dν/dμ(x).
pub fn fibre_measure(wg: &WeightedGraph, d: &PathDecomposition, x: &GraphPoint) -> Result<Option<(DiscreteMeasure<ConePoint>, f64)>> {
    let GraphPoint::Edge { edge, .. } = *x else { return Err(Error::NodePoint) };
    let cone = fibre();
    let mut atoms = Vec::new();
    let mut nu = 0.0;
    for p in d.paths.iter().chain(&d.cycles) {
        let len = p.length(&wg.graph);
        for &(e, fwd) in &p.steps {
            if e == edge {
                let w = p.weight / len;
                nu += w;
                atoms.push((cone.point(len, if fwd { FORWARD } else { BACKWARD }), w));
            }
        }
    }
    if atoms.is_empty() {
        return Ok(None);
    }
    Ok(Some((DiscreteMeasure::new(atoms)?, nu / wg.density[edge])))
}

#[derive(Clone, Copy, Debug)]
pub struct EmbeddingOptions {
    pub per_edge: usize,
    pub tie: TieBreak,
    pub rigidity_tol: f64,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions { per_edge: 9, tie: TieBreak::Lexicographic, rigidity_tol: 1e-9 }
    }
}

/// v(x) = dν/dμ(x) · Bar(n_x) at every grid point.
pub fn build_embedding(wg: &WeightedGraph, b: &EdgeFlow, opts: &EmbeddingOptions) -> Result<TangentSection> {
    let d = superpose(&wg.graph, b, opts.tie)?;
    let cone = fibre();
    let pts = grid(&wg.graph, opts.per_edge);
    let values = map_indices(pts.len(), |i| -> Result<FibreValue> {
        let x = pts[i];
        let Some((n_x, ratio)) = fibre_measure(wg, &d, &x)? else {
            return Ok(FibreValue { x, v: ConePoint::apex(), density_ratio: 0.0, atoms: 0, rigidity_defect: 0.0 });
        };
        let bar = solve_barycenter(&cone, &n_x, &SolverOptions::default())?.point;
        let rig = rigidity_check(&cone, &n_x, &bar, &ConePoint::apex(), opts.rigidity_tol);
        if !rig.triggered || rig.halfline_defect > opts.rigidity_tol {
            return Err(Error::RigidityViolation { defect: rig.halfline_defect });
        }
        Ok(FibreValue { x, v: cone.scale(ratio, &bar), density_ratio: ratio, atoms: n_x.atoms().len(), rigidity_defect: rig.halfline_defect })
    });
    Ok(TangentSection { values: values.into_iter().collect::<Result<_>>()? })
}

/// Per-point checks of one section: the differential identity against landmarks, the
/// norm identity, and the pushforward identity for a 1-homogeneous function.
pub fn verify_section(wg: &WeightedGraph, b: &EdgeFlow, section: &TangentSection, landmarks: &[GraphPoint]) -> Result<Report> {
    let g = &wg.graph;
    let cone = fibre();
    let d = superpose(g, b, TieBreak::Lexicographic)?;
    let per_point = map_indices(section.values.len(), |i| -> Result<[f64; 4]> {
        let fv = &section.values[i];
        let v = to_tangent(g, &fv.x, &fv.v)?;
        let mut differential: f64 = 0.0;
        for y in landmarks {
            if g.dist(y, &fv.x) == 0.0 {
                continue;
            }
            let lhs = d_dist(g, y, &v)?;
            let rhs = apply(wg, b, &DistFn(*y), &fv.x)?;
            differential = differential.max((lhs - rhs).abs());
        }
        let norm_gap = (norm(g, &v) - derivation_norm(wg, b, &fv.x)?).abs();
        // ∫ h dn_x = h(Bar n_x)·mass for h = d_x dist_y, read on the fibre as r·(slope)
        let mut pushforward: f64 = 0.0;
        if let Some((n_x, ratio)) = fibre_measure(wg, &d, &fv.x)? {
            for y in landmarks.iter().take(5) {
                let GraphPoint::Edge { edge, offset } = fv.x else { unreachable!() };
                let slope = DistFn(*y).slope(g, edge, offset);
                let h = |p: &ConePoint| p.r * if p.dir == GraphPoint::Node(FORWARD) { slope } else { -slope };
                let integral = n_x.integrate(h);
                let at_bar = if ratio > 0.0 { h(&cone.scale(1.0 / ratio, &fv.v)) } else { 0.0 };
                pushforward = pushforward.max((integral - at_bar).abs());
            }
        }
        Ok([differential, norm_gap, pushforward, fv.rigidity_defect])
    });
    let mut w = [
        Worst::new("d_x dist_y(v(x)) = b(dist_y)(x) over landmarks", 1e-7),
        Worst::new("|v(x)| = |b|(x)", 1e-9),
        Worst::new("homogeneous pushforward identity", 1e-8),
        Worst::new("half-line rigidity of n_x", 1e-9),
    ];
    for r in per_point {
        for (k, x) in r?.into_iter().enumerate() {
            w[k].see(x);
        }
    }
    let mut report = Report::new();
    for x in &w {
        report.push(x.check());
    }
    Ok(report)
}

/// Largest fibre distance between two sections over the same grid.
pub fn section_distance(a: &TangentSection, b: &TangentSection) -> f64 {
    let cone = fibre();
    a.values.iter().zip(&b.values).map(|(p, q)| cone.dist(&p.v, &q.v)).fold(0.0, f64::max)
}

/// The three linearity identities at every grid point, evaluated in the tangent cones of
/// the graph itself: F(b₁+b₂) = F(b₁) ⊕ F(b₂), d_x(F(b₁), F(b₂)) = |b₁−b₂|(x) and the
/// parallelogram law for fibre norms.
pub fn verify_linearity(wg: &WeightedGraph, b1: &EdgeFlow, b2: &EdgeFlow, opts: &EmbeddingOptions) -> Result<Report> {
    let g = &wg.graph;
    let f1 = build_embedding(wg, b1, opts)?;
    let f2 = build_embedding(wg, b2, opts)?;
    let fs = build_embedding(wg, &b1.add(b2), opts)?;
    let fd = build_embedding(wg, &b1.sub(b2), opts)?;
    let diff = b1.sub(b2);
    let rows = map_indices(f1.values.len(), |i| -> Result<[f64; 3]> {
        let x = f1.values[i].x;
        let t = |s: &TangentSection| to_tangent(g, &x, &s.values[i].v);
        let (v1, v2, vs, vd) = (t(&f1)?, t(&f2)?, t(&fs)?, t(&fd)?);
        let sum_gap = tangent_distance(g, &oplus(&v1, &v2), &vs.clone().into())?;
        let dist_gap = (cone_metric(g, &v1, &v2)?.value - derivation_norm(wg, &diff, &x)?).abs();
        let (n1, n2, ns, nd) = (norm(g, &v1), norm(g, &v2), norm(g, &vs), norm(g, &vd));
        let par = (ns * ns + nd * nd - 2.0 * (n1 * n1 + n2 * n2)).abs();
        Ok([sum_gap, dist_gap, par])
    });
    let mut w = [
        Worst::new("F(b1+b2) = F(b1) (+) F(b2)", 1e-7),
        Worst::new("d_x(F(b1), F(b2)) = |b1-b2|", 1e-7),
        Worst::new("|F(b1+b2)|^2 + |F(b1-b2)|^2 = 2|F(b1)|^2 + 2|F(b2)|^2", 1e-7),
    ];
    for r in rows {
        for (k, x) in r?.into_iter().enumerate() {
            w[k].see(x);
        }
    }
    let mut report = Report::new();
    for x in &w {
        report.push(x.check());
    }
    Ok(report)
}

/// Parallelogram slack for one pair, both for the ‖·‖₂ norm of derivations and for the
/// integrated fibre norms of their sections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParallelogramSlack {
    pub norm22_relative: f64,
    pub sections_relative: f64,
}

fn section_l2_sq(wg: &WeightedGraph, s: &TangentSection, per_edge: usize) -> f64 {
    s.values
        .iter()
        .map(|fv| {
            let GraphPoint::Edge { edge, .. } = fv.x else { return 0.0 };
            fv.v.r * fv.v.r * wg.edge_mass(edge) / per_edge as f64
        })
        .sum()
}

pub fn parallelogram_slack(wg: &WeightedGraph, b1: &EdgeFlow, b2: &EdgeFlow, opts: &EmbeddingOptions) -> Result<ParallelogramSlack> {
    let n = |b: &EdgeFlow| derivation_norm_22(wg, b).l2_norm.powi(2);
    let (s, d) = (b1.add(b2), b1.sub(b2));
    let rhs = 2.0 * n(b1) + 2.0 * n(b2);
    let lhs = n(&s) + n(&d);
    let scale = rhs.max(f64::MIN_POSITIVE);
    let sec = |b: &EdgeFlow| -> Result<f64> { Ok(section_l2_sq(wg, &build_embedding(wg, b, opts)?, opts.per_edge)) };
    let (ls, rs) = (sec(&s)? + sec(&d)?, 2.0 * sec(b1)? + 2.0 * sec(b2)?);
    Ok(ParallelogramSlack { norm22_relative: (lhs - rhs).abs() / scale, sections_relative: (ls - rs).abs() / rs.max(f64::MIN_POSITIVE) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HilbertReport {
    pub report: Report,
    /// counts of relative slacks per decade, from ≤1e-16 up to >1e-8
    pub histogram: Vec<(String, usize)>,
}

pub fn hilbertianity_report(wg: &WeightedGraph, pairs: &[(EdgeFlow, EdgeFlow)], opts: &EmbeddingOptions) -> Result<HilbertReport> {
    let slacks: Vec<ParallelogramSlack> = pairs.iter().map(|(a, b)| parallelogram_slack(wg, a, b, opts)).collect::<Result<_>>()?;
    let mut w22 = Worst::new("parallelogram law for the 2-norm of derivations, relative", 1e-8);
    let mut ws = Worst::new("parallelogram law for integrated section norms, relative", 1e-8);
    let edges = [1e-16, 1e-14, 1e-12, 1e-10, 1e-8];
    let mut counts = vec![0usize; edges.len() + 1];
    for s in &slacks {
        w22.see(s.norm22_relative);
        ws.see(s.sections_relative);
        let bin = edges.iter().position(|&e| s.norm22_relative.max(s.sections_relative) <= e).unwrap_or(edges.len());
        counts[bin] += 1;
    }
    let mut labels: Vec<String> = edges.iter().map(|e| format!("<={e:e}")).collect();
    labels.push(">1e-8".into());
    let mut report = Report::new();
    report.push(w22.check());
    report.push(ws.check());
    Ok(HilbertReport { report, histogram: labels.into_iter().zip(counts).collect() })
}

/// Both tie-breaks of the superposition give the same section.
pub fn tie_break_gap(wg: &WeightedGraph, b: &EdgeFlow, per_edge: usize) -> Result<f64> {
    let a = build_embedding(wg, b, &EmbeddingOptions { per_edge, tie: TieBreak::Lexicographic, ..Default::default() })?;
    let c = build_embedding(wg, b, &EmbeddingOptions { per_edge, tie: TieBreak::Reverse, ..Default::default() })?;
    Ok(section_distance(&a, &c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_edge_transport() {
        let wg = WeightedGraph::unit(MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)]).unwrap());
        let s = build_embedding(&wg, &EdgeFlow { flow: vec![1.0] }, &EmbeddingOptions::default()).unwrap();
        assert_eq!(s.values.len(), 9);
        for i in 0..9 {
            assert_abs_diff_eq!(s.signed(i), 1.0, epsilon = 1e-14);
        }
        let z = build_embedding(&wg, &EdgeFlow { flow: vec![0.0] }, &EmbeddingOptions::default()).unwrap();
        assert!(z.values.iter().all(|v| v.v.r == 0.0));
    }

    #[test]
    fn tripod_through_flow() {
        let g = MetricGraph::tripod();
        let wg = WeightedGraph::unit(g.clone());
        // a → o → b with edges stored o-a, o-b, o-c
        let b = EdgeFlow { flow: vec![-1.0, 1.0, 0.0] };
        let s = build_embedding(&wg, &b, &EmbeddingOptions::default()).unwrap();
        for (i, fv) in s.values.iter().enumerate() {
            match fv.x {
                GraphPoint::Edge { edge: 0, .. } => assert_abs_diff_eq!(s.signed(i), -1.0, epsilon = 1e-14),
                GraphPoint::Edge { edge: 1, .. } => assert_abs_diff_eq!(s.signed(i), 1.0, epsilon = 1e-14),
                _ => assert_eq!(fv.v.r, 0.0),
            }
            assert!(fv.atoms <= 1);
        }
        let lm: Vec<GraphPoint> = (0..4).map(GraphPoint::Node).collect();
        assert!(verify_section(&wg, &b, &s, &lm).unwrap().all_passed());
    }

    #[test]
    fn opposing_flows() {
        let wg = WeightedGraph::unit(MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)]).unwrap());
        let b1 = EdgeFlow { flow: vec![1.0] };
        let r = verify_linearity(&wg, &b1, &b1.scaled(-1.0), &EmbeddingOptions::default()).unwrap();
        assert!(r.all_passed(), "{r:?}");
        let r = verify_linearity(&wg, &b1, &EdgeFlow { flow: vec![0.0] }, &EmbeddingOptions::default()).unwrap();
        assert!(r.all_passed());
    }

    #[test]
    fn random_tree_section() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = MetricGraph::random_tree(8, &mut rng);
        let wg = WeightedGraph::new(g.clone(), (0..8).map(|k| 0.5 + 0.2 * k as f64).collect()).unwrap();
        let b = EdgeFlow::random(&g, &mut rng);
        let s = build_embedding(&wg, &b, &EmbeddingOptions::default()).unwrap();
        let lm: Vec<GraphPoint> = (0..20).map(|_| g.sample_point(&mut rng)).collect();
        let r = verify_section(&wg, &b, &s, &lm).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!(tie_break_gap(&wg, &b, 9).unwrap() <= 1e-7);
        let b2 = EdgeFlow::random(&g, &mut rng);
        let r = verify_linearity(&wg, &b, &b2, &EmbeddingOptions::default()).unwrap();
        assert!(r.all_passed(), "{r:?}");
        let p = parallelogram_slack(&wg, &b, &b2, &EmbeddingOptions::default()).unwrap();
        assert!(p.norm22_relative <= 1e-12 && p.sections_relative <= 1e-12);
    }

    #[test]
    fn orthogonal_supports() {
        let g = MetricGraph::tripod();
        let wg = WeightedGraph::unit(g);
        let b1 = EdgeFlow { flow: vec![1.0, 0.0, 0.0] };
        let b2 = EdgeFlow { flow: vec![0.0, 0.0, 2.0] };
        let p = parallelogram_slack(&wg, &b1, &b2, &EmbeddingOptions::default()).unwrap();
        assert!(p.norm22_relative <= 1e-15);
        let p = parallelogram_slack(&wg, &b1, &b1, &EmbeddingOptions::default()).unwrap();
        assert_eq!(p.norm22_relative, 0.0);
    }
}
