//! Euclidean cones over finite metric spaces.
//!
//! Base points closer than π are joined by an arc of that length, so the base
//! becomes a metric graph and the cone is a union of flat sectors glued along
//! rays. Pairs at distance ≥ π stay unjoined and their geodesics pass through
//! the apex. The cone is CAT(0) exactly when every loop of arcs has length ≥ 2π.

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::model::Kappa;
use crate::space::{f64_field, GeodesicSpace, DEFAULT_RADIUS_CAP};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConePoint {
    pub r: f64,
    pub dir: GraphPoint,
}

impl ConePoint {
    pub fn apex() -> Self {
        ConePoint { r: 0.0, dir: GraphPoint::Node(0) }
    }

    pub fn is_apex(&self) -> bool {
        self.r == 0.0
    }
}

#[derive(Clone, Debug)]
pub struct EuclideanCone {
    base: MetricGraph,
    base_distances: Vec<Vec<f64>>,
    pub radius_cap: f64,
    pub sample_radius: f64,
}

impl EuclideanCone {
    pub fn new(base_distances: Vec<Vec<f64>>) -> Result<Self> {
        let n = base_distances.len();
        if n == 0 {
            return invalid("cone base is empty");
        }
        for (i, row) in base_distances.iter().enumerate() {
            if row.len() != n {
                return invalid("base distance matrix is not square");
            }
            if row[i] != 0.0 {
                return invalid("base distance matrix has a non-zero diagonal");
            }
            for (j, &d) in row.iter().enumerate() {
                if !(d >= 0.0) || (j != i && d == 0.0) || d != base_distances[j][i] {
                    return invalid("base distances are not a symmetric positive metric");
                }
                for k in 0..n {
                    if d > base_distances[i][k] + base_distances[k][j] + 1e-12 {
                        return invalid("base distances violate the triangle inequality");
                    }
                }
            }
        }
        let names = (0..n).map(|i| format!("x{i}")).collect();
        let mut arcs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if base_distances[i][j] < PI {
                    arcs.push((i, j, base_distances[i][j]));
                }
            }
        }
        let base = MetricGraph::new(names, arcs)?;
        for i in 0..n {
            for j in 0..n {
                let want = base_distances[i][j].min(PI);
                let got = base.node_distance(i, j).min(PI);
                if (want - got).abs() > 1e-9 {
                    return invalid("base distances below π are not realized by arcs");
                }
            }
        }
        if base.girth() < 2.0 * PI - 1e-12 {
            return invalid(format!("base has a loop of length {} < 2π; the cone is not CAT(0)", base.girth()));
        }
        Ok(EuclideanCone { base, base_distances, radius_cap: DEFAULT_RADIUS_CAP, sample_radius: 2.0 })
    }

    /// The cone over n points at mutual distance π: n half-lines glued at the apex.
    pub fn spider(n: usize) -> Self {
        let d = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { PI }).collect()).collect();
        EuclideanCone::new(d).expect("spider base is valid")
    }

    pub fn base(&self) -> &MetricGraph {
        &self.base
    }

    pub fn base_distances(&self) -> &[Vec<f64>] {
        &self.base_distances
    }

    pub fn point(&self, r: f64, base_index: usize) -> ConePoint {
        assert!(base_index < self.base.n_nodes());
        ConePoint { r, dir: GraphPoint::Node(base_index) }
    }

    pub fn scale(&self, lambda: f64, p: &ConePoint) -> ConePoint {
        ConePoint { r: lambda * p.r, dir: p.dir }
    }

    /// Angular separation min(d_X, π) of two base directions.
    pub fn base_angle(&self, u: &GraphPoint, w: &GraphPoint) -> f64 {
        self.base.distance(u, w).min(PI)
    }

    /// The "page" of direction from the point (r,u) toward (s,w), together with the
    /// planar angle ψ between that direction and the outward ray at (r,u).
    fn direction(&self, x: &ConePoint, y: &ConePoint) -> (Option<(usize, bool)>, f64) {
        if y.is_apex() {
            return (None, PI);
        }
        let th = self.base_angle(&x.dir, &y.dir);
        if th >= PI {
            return (None, PI);
        }
        if th == 0.0 {
            return (None, if y.r >= x.r { 0.0 } else { PI });
        }
        let (dx, dy) = (y.r * th.cos() - x.r, y.r * th.sin());
        (self.base.first_direction(&x.dir, &y.dir), dy.atan2(dx))
    }

    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> GraphPoint {
        if self.base.edges().is_empty() || rng.random::<bool>() {
            GraphPoint::Node(rng.random_range(0..self.base.n_nodes()))
        } else {
            self.base.sample_point(rng)
        }
    }

    /// Cone-only barycenter: for fixed direction σ the objective is r² − 2r·g(σ) + const
    /// with g(σ) = Σ w_k r_k cos(min(d(σ,σ_k), π)), so the answer is (max(g,0), argmax g).
    fn cone_barycenter(&self, atoms: &[(ConePoint, f64)]) -> ConePoint {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let live: Vec<(GraphPoint, f64)> =
            atoms.iter().filter(|(p, _)| !p.is_apex()).map(|(p, w)| (p.dir, w * p.r / total)).collect();
        if live.is_empty() {
            return ConePoint::apex();
        }
        let g = |s: &GraphPoint| live.iter().map(|(d, c)| c * self.base_angle(s, d).cos()).sum::<f64>();
        let mut best = (f64::NEG_INFINITY, GraphPoint::Node(0));
        let consider = |p: GraphPoint, best: &mut (f64, GraphPoint)| {
            let v = g(&p);
            if v > best.0 {
                *best = (v, p);
            }
        };
        for n in 0..self.base.n_nodes() {
            consider(GraphPoint::Node(n), &mut best);
        }
        for (d, _) in &live {
            consider(*d, &mut best);
        }
        for (k, e) in self.base.edges().iter().enumerate() {
            let pieces: Vec<_> = live.iter().map(|(d, c)| (self.base.distance_pieces(k, d), *c)).collect();
            let mut cuts: Vec<f64> = vec![0.0, e.len];
            for (ps, _) in &pieces {
                for &(lo, hi, m, c) in ps {
                    cuts.push(lo);
                    if m != 0.0 {
                        let s = (PI - c) / m;
                        if s > lo && s < hi {
                            cuts.push(s);
                        }
                    }
                }
            }
            cuts.sort_by(|a, b| a.total_cmp(b));
            cuts.dedup();
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                // g = P cos s + Q sin s + const on this piece
                let (mut pc, mut qs) = (0.0, 0.0);
                for (ps, wt) in &pieces {
                    let &(_, _, m, c) = ps.iter().find(|p| p.0 <= mid && mid <= p.1).expect("covered");
                    if m * mid + c < PI {
                        // cos(m s + c) with m = ±1
                        pc += wt * c.cos();
                        qs += -wt * m * c.sin();
                    }
                }
                let s0 = qs.atan2(pc);
                for s in [s0, s0 - 2.0 * PI, s0 + 2.0 * PI] {
                    if s > w[0] && s < w[1] {
                        consider(self.base.on_edge(k, s), &mut best);
                    }
                }
                consider(self.base.on_edge(k, mid), &mut best);
            }
        }
        if best.0 <= 0.0 {
            ConePoint::apex()
        } else {
            ConePoint { r: best.0, dir: best.1 }
        }
    }
}

impl GeodesicSpace for EuclideanCone {
    type Point = ConePoint;

    fn name(&self) -> String {
        format!("cone({}-point base)", self.base.n_nodes())
    }

    fn dist(&self, p: &ConePoint, q: &ConePoint) -> f64 {
        if p.is_apex() || q.is_apex() {
            return (p.r - q.r).abs();
        }
        let h = (self.base_angle(&p.dir, &q.dir) / 2.0).sin();
        ((p.r - q.r).powi(2) + 4.0 * p.r * q.r * h * h).sqrt()
    }

    fn geodesic(&self, p: &ConePoint, q: &ConePoint, t: f64) -> Result<ConePoint> {
        if p.is_apex() || q.is_apex() || self.base_angle(&p.dir, &q.dir) >= PI {
            // through the apex
            let total = p.r + q.r;
            let s = t * total;
            return Ok(if s <= p.r {
                ConePoint { r: p.r - s, dir: p.dir }
            } else {
                ConePoint { r: s - p.r, dir: q.dir }
            });
        }
        let th = self.base_angle(&p.dir, &q.dir);
        let (x, y) = ((1.0 - t) * p.r + t * q.r * th.cos(), t * q.r * th.sin());
        let r = x.hypot(y);
        if th == 0.0 {
            return Ok(ConePoint { r, dir: p.dir });
        }
        let phi = y.atan2(x).clamp(0.0, th);
        let dir = self.base.geodesic(&p.dir, &q.dir, phi / th)?;
        Ok(ConePoint { r, dir })
    }

    fn cat_radius(&self, _p: &ConePoint) -> f64 {
        self.radius_cap
    }

    fn curvature_bound(&self) -> Kappa {
        Kappa(0.0)
    }

    fn is_nonbranching_from(&self, p: &ConePoint) -> Option<bool> {
        if p.is_apex() {
            Some(true)
        } else {
            None
        }
    }

    fn angle_at(&self, x: &ConePoint, y: &ConePoint, z: &ConePoint) -> Option<f64> {
        if y == x || z == x {
            return None;
        }
        if x.is_apex() {
            return Some(self.base_angle(&y.dir, &z.dir));
        }
        let (py, sy) = self.direction(x, y);
        let (pz, sz) = self.direction(x, z);
        let radial = |s: f64| s == 0.0 || s == PI;
        Some(if radial(sy) || radial(sz) || py == pz {
            (sy - sz).abs()
        } else {
            (sy + sz).min(2.0 * PI - sy - sz)
        })
    }

    fn exact_barycenter(&self, atoms: &[(ConePoint, f64)]) -> Option<Result<ConePoint>> {
        Some(Ok(self.cone_barycenter(atoms)))
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ConePoint {
        let r = self.sample_radius * rng.random::<f64>();
        ConePoint { r, dir: self.sample_base(rng) }
    }

    fn sample_base_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ConePoint {
        if rng.random::<f64>() < 0.25 {
            ConePoint::apex()
        } else {
            self.sample_point(rng)
        }
    }

    fn point_to_json(&self, p: &ConePoint) -> Value {
        match p.dir {
            GraphPoint::Node(i) => json!({ "radius": p.r, "base": i }),
            GraphPoint::Edge { edge, offset } => {
                let e = &self.base.edges()[edge];
                json!({ "radius": p.r, "arc": [e.a, e.b], "offset": offset })
            }
        }
    }

    fn point_from_json(&self, v: &Value) -> Result<ConePoint> {
        let r = f64_field(v, "radius")?;
        if !(r >= 0.0 && r.is_finite()) {
            return invalid("cone radius must be non-negative");
        }
        let n = self.base.n_nodes();
        if let Some(i) = v.get("base").and_then(Value::as_u64) {
            let i = i as usize;
            if i >= n {
                return invalid("base index out of range");
            }
            return Ok(ConePoint { r, dir: GraphPoint::Node(i) });
        }
        let arc = v
            .get("arc")
            .and_then(Value::as_array)
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Invalid("cone point needs 'base' or 'arc' + 'offset'".into()))?;
        let idx = |k: usize| arc[k].as_u64().map(|x| x as usize).filter(|&x| x < n).ok_or_else(|| Error::Invalid("bad arc".into()));
        let (a, b) = (idx(0)?, idx(1)?);
        let (k, flipped) = self.base.find_edge(a, b).ok_or_else(|| Error::Invalid("no arc between these base points".into()))?;
        let s = f64_field(v, "offset")?;
        let len = self.base.edges()[k].len;
        if !(0.0..=len).contains(&s) {
            return invalid("arc offset out of range");
        }
        Ok(ConePoint { r, dir: self.base.on_edge(k, if flipped { len - s } else { s }) })
    }
}
