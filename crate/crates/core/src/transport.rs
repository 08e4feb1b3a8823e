//! Derivations and normal 1-currents on metric graphs, and the superposition of a
//! flow into weighted paths and cycles.

use rand::{Rng, RngExt};
use serde::Serialize;
use serde_json::{json, Value};

use crate::curves::SampledCurve;
use crate::error::{Error, Result};
use crate::graph::{GraphPoint, MetricGraph};

/// A metric graph with reference measure μ = density_e · (length measure) on edge e.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    pub graph: MetricGraph,
    pub density: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(graph: MetricGraph, density: Vec<f64>) -> Result<Self> {
        if density.len() != graph.edges().len() {
            return Err(Error::Invalid("one density per edge is required".into()));
        }
        if density.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Invalid("densities must be positive".into()));
        }
        if !graph.is_connected() {
            return Err(Error::Invalid("graph is not connected".into()));
        }
        Ok(WeightedGraph { graph, density })
    }

    pub fn unit(graph: MetricGraph) -> Self {
        let n = graph.edges().len();
        WeightedGraph { graph, density: vec![1.0; n] }
    }

    pub fn len(&self, e: usize) -> f64 {
        self.graph.edges()[e].len
    }

    /// μ(e).
    pub fn edge_mass(&self, e: usize) -> f64 {
        self.density[e] * self.len(e)
    }
}

/// A discrete derivation: a signed flow per edge, positive along the stored a → b
/// orientation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeFlow {
    pub flow: Vec<f64>,
}

impl EdgeFlow {
    pub fn zero(g: &MetricGraph) -> Self {
        EdgeFlow { flow: vec![0.0; g.edges().len()] }
    }

    pub fn random<R: Rng + ?Sized>(g: &MetricGraph, rng: &mut R) -> Self {
        EdgeFlow {
            flow: (0..g.edges().len())
                .map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect(),
        }
    }

    pub fn add(&self, other: &EdgeFlow) -> EdgeFlow {
        EdgeFlow { flow: self.flow.iter().zip(&other.flow).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &EdgeFlow) -> EdgeFlow {
        EdgeFlow { flow: self.flow.iter().zip(&other.flow).map(|(a, b)| a - b).collect() }
    }

    pub fn scaled(&self, lambda: f64) -> EdgeFlow {
        EdgeFlow { flow: self.flow.iter().map(|a| lambda * a).collect() }
    }

    /// Net outflow at each node.
    pub fn divergence(&self, g: &MetricGraph) -> Vec<f64> {
        let mut div = vec![0.0; g.n_nodes()];
        for (e, f) in g.edges().iter().zip(&self.flow) {
            div[e.a] += f;
            div[e.b] -= f;
        }
        div
    }

    /// `{"flow":[["a","b",0.7],..], "density":[..]}`; an entry against the stored
    /// orientation of its edge is negated. Missing edges carry no flow.
    pub fn from_json(g: &MetricGraph, v: &Value) -> Result<(EdgeFlow, Option<Vec<f64>>)> {
        let mut flow = EdgeFlow::zero(g);
        let entries = v.get("flow").and_then(Value::as_array).ok_or_else(|| Error::Invalid("flow file needs 'flow'".into()))?;
        for item in entries {
            let t = item.as_array().filter(|a| a.len() == 3).ok_or_else(|| Error::Invalid("flow entries are [from, to, value]".into()))?;
            let node = |x: &Value| {
                x.as_str().and_then(|s| g.node_index(s)).ok_or_else(|| Error::Invalid(format!("unknown node {x}")))
            };
            let (a, b) = (node(&t[0])?, node(&t[1])?);
            let val = t[2].as_f64().ok_or_else(|| Error::Invalid("non-numeric flow".into()))?;
            let (k, flipped) = g.find_edge(a, b).ok_or_else(|| Error::Invalid("flow on a missing edge".into()))?;
            flow.flow[k] += if flipped { -val } else { val };
        }
        let density = match v.get("density") {
            None => None,
            Some(d) => Some(
                d.as_array()
                    .ok_or_else(|| Error::Invalid("'density' must be a list".into()))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::Invalid("non-numeric density".into())))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok((flow, density))
    }

    pub fn to_json(&self, wg: &WeightedGraph) -> Value {
        let names = wg.graph.names();
        let flow: Vec<Value> = wg.graph.edges().iter().zip(&self.flow).map(|(e, f)| json!([names[e.a], names[e.b], f])).collect();
        json!({ "flow": flow, "density": wg.density })
    }
}

/// A function on a metric graph read edge by edge, with the offsets where it may fail
/// to be smooth.
pub trait EdgeFn: Sync {
    fn on_edge(&self, g: &MetricGraph, e: usize, s: f64) -> f64;
    fn breaks(&self, g: &MetricGraph, e: usize) -> Vec<f64>;

    /// d/ds at an offset inside a smooth piece. The default differentiates the quadratic
    /// through three points of the piece, so it is exact for quadratics.
    fn slope(&self, g: &MetricGraph, e: usize, s: f64) -> f64 {
        let (lo, hi) = piece_around(&self.breaks(g, e), g.edges()[e].len, s);
        let h = 0.25 * (hi - lo);
        let m = 0.5 * (lo + hi);
        let (f0, f1, f2) = (self.on_edge(g, e, m - h), self.on_edge(g, e, m), self.on_edge(g, e, m + h));
        (f2 - f0) / (2.0 * h) + (f2 - 2.0 * f1 + f0) / (h * h) * (s - m)
    }

    fn at(&self, g: &MetricGraph, p: &GraphPoint) -> f64 {
        match *p {
            GraphPoint::Edge { edge, offset } => self.on_edge(g, edge, offset),
            GraphPoint::Node(n) => {
                let k = g.incident(n)[0];
                let e = &g.edges()[k];
                self.on_edge(g, k, if e.a == n { 0.0 } else { e.len })
            }
        }
    }
}

fn piece_around(breaks: &[f64], len: f64, s: f64) -> (f64, f64) {
    let mut lo: f64 = 0.0;
    let mut hi = len;
    for &b in breaks {
        if b <= s {
            lo = lo.max(b);
        }
        if b > s {
            hi = hi.min(b);
        }
    }
    (lo, hi)
}

/// Continuous piecewise-linear function: node values plus interior breakpoints per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct PlFunction {
    pub node_values: Vec<f64>,
    /// (offset, value) pairs strictly inside each edge, sorted by offset
    pub interior: Vec<Vec<(f64, f64)>>,
}

impl PlFunction {
    pub fn constant(g: &MetricGraph, c: f64) -> Self {
        PlFunction { node_values: vec![c; g.n_nodes()], interior: vec![Vec::new(); g.edges().len()] }
    }

    pub fn random<R: Rng + ?Sized>(g: &MetricGraph, rng: &mut R) -> Self {
        let node_values = (0..g.n_nodes()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let interior = g
            .edges()
            .iter()
            .map(|e| {
                let k = rng.random_range(0..3);
                let mut v: Vec<(f64, f64)> = (0..k).map(|_| (e.len * rng.random_range(0.05..0.95), rng.random_range(-2.0..2.0))).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            })
            .collect();
        PlFunction { node_values, interior }
    }

    fn knots(&self, g: &MetricGraph, e: usize) -> Vec<(f64, f64)> {
        let ed = &g.edges()[e];
        let mut k = vec![(0.0, self.node_values[ed.a])];
        k.extend(self.interior[e].iter().copied());
        k.push((ed.len, self.node_values[ed.b]));
        k
    }
}

impl EdgeFn for PlFunction {
    fn on_edge(&self, g: &MetricGraph, e: usize, s: f64) -> f64 {
        let k = self.knots(g, e);
        for w in k.windows(2) {
            if s <= w[1].0 {
                return w[0].1 + (w[1].1 - w[0].1) * (s - w[0].0) / (w[1].0 - w[0].0);
            }
        }
        k.last().unwrap().1
    }

    fn breaks(&self, _g: &MetricGraph, e: usize) -> Vec<f64> {
        self.interior[e].iter().map(|p| p.0).collect()
    }

    fn slope(&self, g: &MetricGraph, e: usize, s: f64) -> f64 {
        let k = self.knots(g, e);
        for w in k.windows(2) {
            if s < w[1].0 {
                return (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            }
        }
        let n = k.len();
        (k[n - 1].1 - k[n - 2].1) / (k[n - 1].0 - k[n - 2].0)
    }
}

/// The distance function d(y, ·).
#[derive(Clone, Debug)]
pub struct DistFn(pub GraphPoint);

impl EdgeFn for DistFn {
    fn on_edge(&self, g: &MetricGraph, e: usize, s: f64) -> f64 {
        g.distance(&self.0, &g.on_edge(e, s))
    }

    fn breaks(&self, g: &MetricGraph, e: usize) -> Vec<f64> {
        g.distance_pieces(e, &self.0).iter().skip(1).map(|p| p.0).collect()
    }

    fn slope(&self, g: &MetricGraph, e: usize, s: f64) -> f64 {
        let pieces = g.distance_pieces(e, &self.0);
        pieces.iter().find(|p| s < p.1).unwrap_or(pieces.last().unwrap()).2
    }
}

/// Pointwise product of two edge functions.
pub struct Product<'a>(pub &'a dyn EdgeFn, pub &'a dyn EdgeFn);

impl EdgeFn for Product<'_> {
    fn on_edge(&self, g: &MetricGraph, e: usize, s: f64) -> f64 {
        self.0.on_edge(g, e, s) * self.1.on_edge(g, e, s)
    }

    fn breaks(&self, g: &MetricGraph, e: usize) -> Vec<f64> {
        let mut b = self.0.breaks(g, e);
        b.extend(self.1.breaks(g, e));
        b
    }
}

fn interior_of(p: &GraphPoint) -> Result<(usize, f64)> {
    match *p {
        GraphPoint::Edge { edge, offset } => Ok((edge, offset)),
        GraphPoint::Node(_) => Err(Error::NodePoint),
    }
}

/// b(f)(x) = flow_e/density_e · f'(x) at a point inside edge e.
pub fn apply(wg: &WeightedGraph, b: &EdgeFlow, f: &dyn EdgeFn, at: &GraphPoint) -> Result<f64> {
    let (e, s) = interior_of(at)?;
    Ok(b.flow[e] / wg.density[e] * f.slope(&wg.graph, e, s))
}

/// |b|(x) = |flow_e|/density_e.
pub fn derivation_norm(wg: &WeightedGraph, b: &EdgeFlow, at: &GraphPoint) -> Result<f64> {
    let (e, _) = interior_of(at)?;
    Ok(b.flow[e].abs() / wg.density[e])
}

/// sup over landmarks y of b(d(y, ·))(x); approaches |b|(x) from below.
pub fn derivation_norm_via_landmarks(wg: &WeightedGraph, b: &EdgeFlow, at: &GraphPoint, landmarks: &[GraphPoint]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for y in landmarks {
        best = best.max(apply(wg, b, &DistFn(*y), at)?);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norm22 {
    pub l2_norm: f64,
    pub div_l2: f64,
}

/// (∫|b|² dμ)^½ and the ℓ² norm of the node divergence.
pub fn derivation_norm_22(wg: &WeightedGraph, b: &EdgeFlow) -> Norm22 {
    let l2: f64 = (0..b.flow.len()).map(|e| (b.flow[e] / wg.density[e]).powi(2) * wg.edge_mass(e)).sum();
    let div: f64 = b.divergence(&wg.graph).iter().map(|d| d * d).sum();
    Norm22 { l2_norm: l2.sqrt(), div_l2: div.sqrt() }
}

// Gauss–Legendre nodes and weights on [-1, 1]
const GL3: [(f64, f64); 3] = [(-0.7745966692414834, 0.5555555555555556), (0.0, 0.8888888888888888), (0.7745966692414834, 0.5555555555555556)];
const GL5: [(f64, f64); 5] = [
    (-0.906179845938664, 0.23692688505618908),
    (-0.5384693101056831, 0.47862867049936647),
    (0.0, 0.5688888888888889),
    (0.5384693101056831, 0.47862867049936647),
    (0.906179845938664, 0.23692688505618908),
];

/// ∫_from^to g(s) f'(s) ds along edge e (signed by direction), exact on pieces where
/// the integrand is a polynomial of degree ≤ 5.
pub fn edge_integral(g: &MetricGraph, e: usize, from: f64, to: f64, gf: &dyn EdgeFn, ff: &dyn EdgeFn) -> Result<f64> {
    let (lo, hi, sign) = if from <= to { (from, to, 1.0) } else { (to, from, -1.0) };
    let mut cuts = vec![lo, hi];
    cuts.extend(gf.breaks(g, e).into_iter().chain(ff.breaks(g, e)).filter(|&c| c > lo && c < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        let quad = |rule: &[(f64, f64)]| rule.iter().map(|&(x, wt)| wt * gf.on_edge(g, e, m + r * x) * ff.slope(g, e, m + r * x)).sum::<f64>() * r;
        let (q3, q5) = (quad(&GL3), quad(&GL5));
        if !q5.is_finite() || (q3 - q5).abs() > 1e-9 * (1.0 + q5.abs()) {
            return Err(Error::QuadratureFailure);
        }
        total += q5;
    }
    Ok(sign * total)
}

/// The normal 1-current T_b(g, f) = ∫ g b(f) dμ of a derivation.
pub struct Current1<'a> {
    pub wg: &'a WeightedGraph,
    pub b: &'a EdgeFlow,
}

impl Current1<'_> {
    pub fn eval(&self, g: &dyn EdgeFn, f: &dyn EdgeFn) -> Result<f64> {
        let mut total = 0.0;
        for (e, edge) in self.wg.graph.edges().iter().enumerate() {
            if self.b.flow[e] != 0.0 {
                total += self.b.flow[e] * edge_integral(&self.wg.graph, e, 0.0, edge.len, g, f)?;
            }
        }
        Ok(total)
    }

    /// ‖T_b‖ as a density per unit length on each edge, equal to |b|·density.
    pub fn mass_density(&self) -> Vec<f64> {
        self.b.flow.iter().map(|f| f.abs()).collect()
    }

    pub fn mass(&self) -> f64 {
        self.mass_density().iter().enumerate().map(|(e, m)| m * self.wg.len(e)).sum()
    }

    /// ∂T_b as signed node weights, so that T_b(1, f) = Σ f(n) ∂T_b(n).
    pub fn boundary(&self) -> Vec<f64> {
        self.b.divergence(&self.wg.graph).iter().map(|d| -d).collect()
    }
}

pub fn current_from_derivation<'a>(wg: &'a WeightedGraph, b: &'a EdgeFlow) -> Current1<'a> {
    Current1 { wg, b }
}

/// [[c]](g, f) = ∫₀¹ g(c_t) (f∘c)'_t dt, integrated leg by leg along the curve's routes.
pub fn curve_current_eval(g: &MetricGraph, c: &SampledCurve<GraphPoint>, gf: &dyn EdgeFn, ff: &dyn EdgeFn) -> Result<f64> {
    let mut total = 0.0;
    for w in c.points().windows(2) {
        let (legs, _) = g.route(&w[0], &w[1]).ok_or(Error::Invalid("curve leaves its component".into()))?;
        for leg in legs {
            total += edge_integral(g, leg.edge, leg.from, leg.to, gf, ff)?;
        }
    }
    Ok(total)
}

/// ∫₀¹ g(c_t)|ċ_t| dt for a constant-function g per edge: the length traversed on
/// each edge.
pub fn curve_edge_lengths(g: &MetricGraph, c: &SampledCurve<GraphPoint>) -> Vec<f64> {
    let mut out = vec![0.0; g.edges().len()];
    for w in c.points().windows(2) {
        if let Some((legs, _)) = g.route(&w[0], &w[1]) {
            for leg in legs {
                out[leg.edge] += leg.len();
            }
        }
    }
    out
}

/// Tie-break for path extraction: nodes are scanned in name order or its reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TieBreak {
    Lexicographic,
    Reverse,
}

/// A weighted path or cycle following the flow orientation: the edges it uses with
/// their direction of travel (true = toward the stored b end).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowPath {
    pub nodes: Vec<usize>,
    pub steps: Vec<(usize, bool)>,
    pub weight: f64,
}

impl FlowPath {
    pub fn length(&self, g: &MetricGraph) -> f64 {
        self.steps.iter().map(|&(e, _)| g.edges()[e].len).sum()
    }

    /// Constant-speed curve along the path. Edge midpoints are inserted as knots so each
    /// piece is a shortest path lying on its own edge.
    pub fn curve(&self, g: &MetricGraph) -> Result<SampledCurve<GraphPoint>> {
        let total = self.length(g);
        let mut points = vec![GraphPoint::Node(self.nodes[0])];
        let mut times = vec![0.0];
        let mut acc = 0.0;
        for (i, &(e, _)) in self.steps.iter().enumerate() {
            let len = g.edges()[e].len;
            points.push(g.on_edge(e, len / 2.0));
            times.push((acc + len / 2.0) / total);
            acc += len;
            points.push(GraphPoint::Node(self.nodes[i + 1]));
            times.push(acc / total);
        }
        *times.last_mut().unwrap() = 1.0;
        SampledCurve::new(times, points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathDecomposition {
    pub paths: Vec<FlowPath>,
    pub cycles: Vec<FlowPath>,
}

impl PathDecomposition {
    /// Σ w over paths and cycles traversing each edge.
    pub fn edge_mass(&self, g: &MetricGraph) -> Vec<f64> {
        let mut m = vec![0.0; g.edges().len()];
        for p in self.paths.iter().chain(&self.cycles) {
            for &(e, _) in &p.steps {
                m[e] += p.weight;
            }
        }
        m
    }

    /// (e₁)_*π − (e₀)_*π as node weights.
    pub fn endpoint_balance(&self, n_nodes: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_nodes];
        for p in &self.paths {
            out[*p.nodes.last().unwrap()] += p.weight;
            out[p.nodes[0]] -= p.weight;
        }
        out
    }

    /// Σ w_i [[c_i]](g, f) over paths and cycles.
    pub fn eval(&self, g: &MetricGraph, gf: &dyn EdgeFn, ff: &dyn EdgeFn) -> Result<f64> {
        let mut total = 0.0;
        for p in self.paths.iter().chain(&self.cycles) {
            total += p.weight * curve_current_eval(g, &p.curve(g)?, gf, ff)?;
        }
        Ok(total)
    }

    pub fn to_json(&self, g: &MetricGraph) -> Value {
        let names = g.names();
        let item = |p: &FlowPath| json!({ "nodes": p.nodes.iter().map(|&n| names[n].clone()).collect::<Vec<_>>(), "weight": p.weight, "length": p.length(g) });
        json!({ "paths": self.paths.iter().map(item).collect::<Vec<_>>(), "cycles": self.cycles.iter().map(item).collect::<Vec<_>>() })
    }
}

struct Residual<'a> {
    g: &'a MetricGraph,
    /// remaining flow along the stored orientation
    r: Vec<f64>,
    order: Vec<usize>,
}

impl Residual<'_> {
    /// Arcs leaving u with positive residual: (edge, forward, next node, capacity).
    fn out_arcs(&self, u: usize) -> Vec<(usize, bool, usize, f64)> {
        let mut arcs: Vec<_> = self
            .g
            .incident(u)
            .iter()
            .filter_map(|&k| {
                let e = &self.g.edges()[k];
                let f = self.r[k];
                if e.a == u && f > 0.0 {
                    Some((k, true, e.b, f))
                } else if e.b == u && f < 0.0 {
                    Some((k, false, e.a, -f))
                } else {
                    None
                }
            })
            .collect();
        arcs.sort_by_key(|a| self.order.iter().position(|&n| n == a.2));
        arcs
    }

    fn subtract(&mut self, steps: &[(usize, bool)], w: f64, floor: f64) {
        for &(k, fwd) in steps {
            self.r[k] -= if fwd { w } else { -w };
            if self.r[k].abs() <= floor {
                self.r[k] = 0.0;
            }
        }
    }

    /// Widest path from `src` to any node with remaining deficit.
    fn widest_path(&self, src: usize, deficit: &[f64]) -> Option<(Vec<usize>, Vec<(usize, bool)>, f64)> {
        let n = self.g.n_nodes();
        let mut width = vec![0.0f64; n];
        let mut prev: Vec<Option<(usize, usize, bool)>> = vec![None; n];
        let mut done = vec![false; n];
        width[src] = f64::INFINITY;
        loop {
            let mut u = None;
            for &i in &self.order {
                if !done[i] && width[i] > 0.0 && u.is_none_or(|j: usize| width[i] > width[j]) {
                    u = Some(i);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            for (k, fwd, v, cap) in self.out_arcs(u) {
                let w = width[u].min(cap);
                if !done[v] && w > width[v] {
                    width[v] = w;
                    prev[v] = Some((u, k, fwd));
                }
            }
        }
        let sink = self.order.iter().copied().filter(|&v| v != src && deficit[v] > 0.0 && width[v] > 0.0).fold(None, |best: Option<usize>, v| {
            match best {
                Some(b) if width[b] >= width[v] => Some(b),
                _ => Some(v),
            }
        })?;
        let mut nodes = vec![sink];
        let mut steps = Vec::new();
        let mut cur = sink;
        while let Some((u, k, fwd)) = prev[cur] {
            steps.push((k, fwd));
            nodes.push(u);
            cur = u;
        }
        nodes.reverse();
        steps.reverse();
        Some((nodes, steps, width[sink]))
    }

    /// A cycle through the residual, found by walking the widest outgoing arcs.
    fn cycle(&self) -> Option<(Vec<usize>, Vec<(usize, bool)>, f64)> {
        let start = self.order.iter().copied().find(|&u| !self.out_arcs(u).is_empty())?;
        let mut seen = vec![None; self.g.n_nodes()];
        let mut nodes = vec![start];
        let mut steps: Vec<(usize, bool, f64)> = Vec::new();
        let mut u = start;
        seen[u] = Some(0);
        loop {
            let arcs = self.out_arcs(u);
            // acyclic residual with no sources left cannot happen for a circulation
            let (k, fwd, v, cap) = arcs.into_iter().fold(None, |best: Option<(usize, bool, usize, f64)>, a| match best {
                Some(b) if b.3 >= a.3 => Some(b),
                _ => Some(a),
            })?;
            steps.push((k, fwd, cap));
            nodes.push(v);
            if let Some(i) = seen[v] {
                let nodes = nodes[i..].to_vec();
                let steps: Vec<(usize, bool, f64)> = steps[i..].to_vec();
                let w = steps.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
                return Some((nodes, steps.into_iter().map(|s| (s.0, s.1)).collect(), w));
            }
            seen[v] = Some(nodes.len() - 1);
            u = v;
        }
    }
}

/// Greedy flow decomposition: widest source-to-sink paths along the flow orientation,
/// then cycles of the remaining circulation. Every path and cycle follows the flow, so
/// traversal weights add up to |flow| on each edge.
pub fn superpose(g: &MetricGraph, b: &EdgeFlow, tie: TieBreak) -> Result<PathDecomposition> {
    let scale = b.flow.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let floor = 1e-13 * scale;
    let mut order: Vec<usize> = (0..g.n_nodes()).collect();
    order.sort_by(|&i, &j| g.names()[i].cmp(&g.names()[j]));
    if tie == TieBreak::Reverse {
        order.reverse();
    }
    let mut res = Residual { g, r: b.flow.clone(), order };
    let mut excess = b.divergence(g);
    for x in excess.iter_mut() {
        if x.abs() <= floor {
            *x = 0.0;
        }
    }
    let mut paths = Vec::new();
    let limit = 4 * (g.edges().len() + g.n_nodes()) + 16;
    for _ in 0..limit {
        let deficit: Vec<f64> = excess.iter().map(|x| -x).collect();
        let Some(src) = res.order.iter().copied().find(|&u| excess[u] > 0.0) else { break };
        let Some((nodes, steps, width)) = res.widest_path(src, &deficit) else {
            return Err(Error::Invalid("flow decomposition got stuck: source without reachable sink".into()));
        };
        let sink = *nodes.last().unwrap();
        let w = width.min(excess[src]).min(-excess[sink]);
        res.subtract(&steps, w, floor);
        excess[src] -= w;
        excess[sink] += w;
        for i in [src, sink] {
            if excess[i].abs() <= floor {
                excess[i] = 0.0;
            }
        }
        paths.push(FlowPath { nodes, steps, weight: w });
    }
    let mut cycles = Vec::new();
    for _ in 0..limit {
        let Some((nodes, steps, w)) = res.cycle() else { break };
        res.subtract(&steps, w, floor);
        cycles.push(FlowPath { nodes, steps, weight: w });
    }
    if res.r.iter().any(|&x| x != 0.0) || excess.iter().any(|&x| x != 0.0) {
        return Err(Error::Invalid("flow decomposition left a residual".into()));
    }
    Ok(PathDecomposition { paths, cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_edge() -> WeightedGraph {
        WeightedGraph::unit(MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)]).unwrap())
    }

    fn node(g: &MetricGraph, n: &str) -> GraphPoint {
        GraphPoint::Node(g.node_index(n).unwrap())
    }

    #[test]
    fn norms_on_a_unit_edge() {
        let wg = unit_edge();
        let b = EdgeFlow { flow: vec![1.0] };
        let x = wg.graph.on_edge(0, 0.4);
        let ends = [node(&wg.graph, "u"), node(&wg.graph, "v")];
        assert_eq!(derivation_norm(&wg, &b, &x).unwrap(), 1.0);
        assert_eq!(derivation_norm_via_landmarks(&wg, &b, &x, &ends).unwrap(), 1.0);
        assert_eq!(derivation_norm(&wg, &EdgeFlow::zero(&wg.graph), &x).unwrap(), 0.0);
        assert_eq!(derivation_norm(&wg, &b, &ends[0]), Err(Error::NodePoint));
        assert_eq!(derivation_norm_22(&wg, &b), Norm22 { l2_norm: 1.0, div_l2: 2f64.sqrt() });
        let t = current_from_derivation(&wg, &b);
        let one = PlFunction::constant(&wg.graph, 1.0);
        assert_abs_diff_eq!(t.eval(&one, &DistFn(ends[0])).unwrap(), 1.0, epsilon = 1e-15);
        let d = superpose(&wg.graph, &b, TieBreak::Lexicographic).unwrap();
        assert_eq!(d.paths.len(), 1);
        assert_eq!(d.paths[0].weight, 1.0);
    }

    #[test]
    fn tripod_through_flow() {
        let g = MetricGraph::tripod();
        let wg = WeightedGraph::unit(g.clone());
        // a → o → b; edges are stored o-a, o-b, o-c
        let b = EdgeFlow { flow: vec![-1.0, 1.0, 0.0] };
        let (a, bb, c) = (node(&g, "a"), node(&g, "b"), node(&g, "c"));
        let on_c = g.on_edge(2, 0.5);
        assert_eq!(apply(&wg, &b, &DistFn(c), &on_c).unwrap(), 0.0);
        for x in [g.on_edge(0, 0.3), g.on_edge(1, 0.6)] {
            let lm = derivation_norm_via_landmarks(&wg, &b, &x, &[a, bb, c]).unwrap();
            assert_eq!(lm, derivation_norm(&wg, &b, &x).unwrap());
        }
        let t = current_from_derivation(&wg, &b);
        let one = PlFunction::constant(&g, 1.0);
        assert_abs_diff_eq!(t.eval(&one, &DistFn(a)).unwrap(), 2.0, epsilon = 1e-14);
        // f = distance to the hub: −1 along leg a, +1 along leg b
        let hub = node(&g, "o");
        assert_abs_diff_eq!(t.eval(&one, &DistFn(hub)).unwrap(), 0.0, epsilon = 1e-14);
        let d = superpose(&g, &b, TieBreak::Lexicographic).unwrap();
        assert_eq!(d.paths.len(), 1);
        let c = d.paths[0].curve(&g).unwrap();
        assert_abs_diff_eq!(curve_current_eval(&g, &c, &one, &DistFn(hub)).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(curve_current_eval(&g, &c, &one, &DistFn(a)).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn y_graph_two_sources() {
        let g = MetricGraph::from_named(&["o", "s1", "s2", "t"], &[("s1", "o", 1.0), ("s2", "o", 1.5), ("o", "t", 2.0)]).unwrap();
        let b = EdgeFlow { flow: vec![0.3, 0.7, 1.0] };
        let d = superpose(&g, &b, TieBreak::Lexicographic).unwrap();
        let mut w: Vec<f64> = d.paths.iter().map(|p| p.weight).collect();
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![0.3, 0.7]);
        assert_eq!(d.edge_mass(&g), vec![0.3, 0.7, 1.0]);
        assert!(d.cycles.is_empty());
    }

    #[test]
    fn triangle_circulation() {
        let g = MetricGraph::from_named(&["a", "b", "c"], &[("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)]).unwrap();
        let b = EdgeFlow { flow: vec![0.5, 0.5, 0.5] };
        assert_eq!(b.divergence(&g), vec![0.0; 3]);
        let d = superpose(&g, &b, TieBreak::Lexicographic).unwrap();
        assert!(d.paths.is_empty());
        assert_eq!(d.cycles.len(), 1);
        assert_eq!(d.edge_mass(&g), vec![0.5; 3]);
        let c = d.cycles[0].curve(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = PlFunction::random(&g, &mut rng);
        let one = PlFunction::constant(&g, 1.0);
        assert_abs_diff_eq!(curve_current_eval(&g, &c, &one, &f).unwrap(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn leibniz_and_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let g = MetricGraph::random_connected(8, 3, &mut rng);
            let wg = WeightedGraph::new(g.clone(), (0..g.edges().len()).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
            let b = EdgeFlow::random(&g, &mut rng);
            let (f, h) = (PlFunction::random(&g, &mut rng), PlFunction::random(&g, &mut rng));
            for _ in 0..20 {
                let e = rng.random_range(0..g.edges().len());
                let x = g.on_edge(e, g.edges()[e].len * rng.random_range(0.01..0.99));
                let lhs = apply(&wg, &b, &Product(&f, &h), &x).unwrap();
                let rhs = f.at(&g, &x) * apply(&wg, &b, &h, &x).unwrap() + h.at(&g, &x) * apply(&wg, &b, &f, &x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} {rhs}");
            }
            let t = current_from_derivation(&wg, &b);
            let one = PlFunction::constant(&g, 1.0);
            let via_boundary: f64 = t.boundary().iter().enumerate().map(|(n, w)| w * f.node_values[n]).sum();
            assert_abs_diff_eq!(t.eval(&one, &f).unwrap(), via_boundary, epsilon = 1e-12);
            let d = superpose(&g, &b, TieBreak::Reverse).unwrap();
            for (m, f) in d.edge_mass(&g).iter().zip(&b.flow) {
                assert_abs_diff_eq!(*m, f.abs(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_tripod_norm() {
        let wg = WeightedGraph::unit(MetricGraph::tripod());
        let b = EdgeFlow { flow: vec![1.0 / 3.0; 3] };
        assert_abs_diff_eq!(derivation_norm_22(&wg, &b).l2_norm, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn flow_json() {
        let g = MetricGraph::tripod();
        let v: Value = serde_json::from_str(r#"{"flow":[["a","o",1.0],["o","b",1.0]]}"#).unwrap();
        let (b, d) = EdgeFlow::from_json(&g, &v).unwrap();
        assert_eq!(b.flow, vec![-1.0, 1.0, 0.0]);
        assert!(d.is_none());
        let wg = WeightedGraph::unit(g.clone());
        assert_eq!(EdgeFlow::from_json(&g, &b.to_json(&wg)).unwrap().0, b);
    }
}
