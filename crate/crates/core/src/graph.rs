//! Metric graphs with their path metric. Trees are the acyclic connected case.

use std::collections::HashMap;

use rand::{Rng, RngExt};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::model::Kappa;
use crate::space::{f64_field, GeodesicSpace, DEFAULT_RADIUS_CAP};

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub len: f64,
}

/// A point of a metric graph. Edge offsets are measured from `edges[edge].a`
/// and lie strictly inside the edge; endpoints are always represented as nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphPoint {
    Node(usize),
    Edge { edge: usize, offset: f64 },
}

/// One leg of a route: travel along `edge` from offset `from` to offset `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    pub edge: usize,
    pub from: f64,
    pub to: f64,
}

impl Leg {
    pub fn len(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

#[derive(Clone, Debug)]
pub struct MetricGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    dist: Vec<Vec<f64>>,
    hop: Vec<Vec<Option<(usize, usize)>>>,
    girth: f64,
    pub radius_cap: f64,
}

pub type MetricTree = MetricGraph;

impl MetricGraph {
    /// Builds a graph that may be disconnected; distances across components are infinite.
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = names.len();
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return invalid(format!("duplicate node name '{name}'"));
            }
        }
        let mut adj = vec![Vec::new(); n];
        let mut es = Vec::with_capacity(edges.len());
        for (k, &(a, b, len)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return invalid("edge endpoint out of range");
            }
            if a == b {
                return invalid("self-loops are not supported");
            }
            if !(len > 0.0 && len.is_finite()) {
                return invalid(format!("edge {k} has non-positive length"));
            }
            adj[a].push(k);
            adj[b].push(k);
            es.push(Edge { a, b, len });
        }
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut hop = vec![vec![None; n]; n];
        for i in 0..n {
            dist[i][i] = 0.0;
        }
        for (k, e) in es.iter().enumerate() {
            if e.len < dist[e.a][e.b] {
                dist[e.a][e.b] = e.len;
                dist[e.b][e.a] = e.len;
                hop[e.a][e.b] = Some((k, e.b));
                hop[e.b][e.a] = Some((k, e.a));
            }
        }
        for m in 0..n {
            for i in 0..n {
                if dist[i][m].is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let via = dist[i][m] + dist[m][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                        hop[i][j] = hop[i][m];
                    }
                }
            }
        }
        // shortest cycle through each edge: its length plus the detour avoiding it
        let mut girth = f64::INFINITY;
        for (k, e) in es.iter().enumerate() {
            let detour = detour_without(&adj, &es, k);
            girth = girth.min(e.len + detour);
        }
        Ok(MetricGraph { names, index, edges: es, adj, dist, hop, girth, radius_cap: DEFAULT_RADIUS_CAP })
    }

    pub fn from_named(names: &[&str], edges: &[(&str, &str, f64)]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let idx: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut es = Vec::new();
        for (a, b, l) in edges {
            let (Some(&ia), Some(&ib)) = (idx.get(a), idx.get(b)) else {
                return invalid(format!("unknown node in edge {a}-{b}"));
            };
            es.push((ia, ib, *l));
        }
        MetricGraph::new(names, es)
    }

    /// `{"nodes":[..], "edges":[["a","b",1.0],..]}`; without `nodes` they are taken from
    /// the edges in order of appearance. Extra fields are ignored.
    pub fn from_json(v: &Value) -> Result<Self> {
        let edges = v.get("edges").and_then(Value::as_array).ok_or_else(|| Error::Invalid("graph needs 'edges'".into()))?;
        let mut names: Vec<String> = match v.get("nodes") {
            Some(n) => serde_json::from_value(n.clone()).map_err(|e| Error::Invalid(format!("nodes: {e}")))?,
            None => Vec::new(),
        };
        let fixed = v.get("nodes").is_some();
        let mut es = Vec::new();
        for item in edges {
            let (a, b, l): (String, String, f64) =
                serde_json::from_value(item.clone()).map_err(|_| Error::Invalid("edges are [from, to, length]".into()))?;
            let mut idx = |n: String| match names.iter().position(|m| *m == n) {
                Some(i) => Ok(i),
                None if !fixed => {
                    names.push(n);
                    Ok(names.len() - 1)
                }
                None => invalid(format!("edge refers to unknown node '{n}'")),
            };
            let (ia, ib) = (idx(a)?, idx(b)?);
            es.push((ia, ib, l));
        }
        let g = MetricGraph::new(names, es)?;
        if !g.is_connected() {
            return invalid("graph is not connected");
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Value {
        let edges: Vec<Value> = self.edges.iter().map(|e| json!([self.names[e.a], self.names[e.b], e.len])).collect();
        json!({ "nodes": self.names, "edges": edges })
    }

    pub fn tree(names: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let g = MetricGraph::new(names, edges)?;
        if !g.is_connected() || g.edges.len() + 1 != g.names.len() {
            return invalid("edges do not form a tree");
        }
        Ok(g)
    }

    /// Three unit legs a, b, c glued at the hub o.
    pub fn tripod() -> Self {
        MetricGraph::from_named(&["o", "a", "b", "c"], &[("o", "a", 1.0), ("o", "b", 1.0), ("o", "c", 1.0)])
            .expect("tripod is valid")
    }

    /// A random tree with `n_edges` edges built by uniform attachment.
    pub fn random_tree<R: Rng + ?Sized>(n_edges: usize, rng: &mut R) -> Self {
        let names = (0..=n_edges).map(|i| format!("v{i}")).collect();
        let edges = (1..=n_edges)
            .map(|i| (rng.random_range(0..i), i, 0.5 + 1.5 * rng.random::<f64>()))
            .collect();
        MetricGraph::tree(names, edges).expect("attachment yields a tree")
    }

    /// A random connected graph: a random spanning tree plus `extra` chords.
    pub fn random_connected<R: Rng + ?Sized>(n_nodes: usize, extra: usize, rng: &mut R) -> Self {
        let names = (0..n_nodes).map(|i| format!("v{i:02}")).collect();
        let mut edges: Vec<(usize, usize, f64)> =
            (1..n_nodes).map(|i| (rng.random_range(0..i), i, 0.5 + rng.random::<f64>())).collect();
        let mut tries = 0;
        while edges.len() < n_nodes - 1 + extra && tries < 1000 {
            tries += 1;
            let a = rng.random_range(0..n_nodes);
            let b = rng.random_range(0..n_nodes);
            if a == b || edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                continue;
            }
            edges.push((a.min(b), a.max(b), 0.5 + rng.random::<f64>()));
        }
        MetricGraph::new(names, edges).expect("random graph is valid")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn incident(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    /// Length of the shortest cycle, infinite for forests.
    pub fn girth(&self) -> f64 {
        self.girth
    }

    pub fn is_connected(&self) -> bool {
        self.dist[0].iter().all(|d| d.is_finite())
    }

    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.girth.is_infinite()
    }

    /// Finds the edge between two named nodes; `true` when it is stored as (b, a).
    pub fn find_edge(&self, a: usize, b: usize) -> Option<(usize, bool)> {
        self.adj[a].iter().find_map(|&k| {
            let e = &self.edges[k];
            if e.a == a && e.b == b {
                Some((k, false))
            } else if e.a == b && e.b == a {
                Some((k, true))
            } else {
                None
            }
        })
    }

    pub fn on_edge(&self, edge: usize, offset: f64) -> GraphPoint {
        let e = &self.edges[edge];
        if offset <= 0.0 {
            GraphPoint::Node(e.a)
        } else if offset >= e.len {
            GraphPoint::Node(e.b)
        } else {
            GraphPoint::Edge { edge, offset }
        }
    }

    /// (node, distance) pairs through which every route leaves p.
    fn exits(&self, p: &GraphPoint) -> Vec<(usize, f64)> {
        match *p {
            GraphPoint::Node(n) => vec![(n, 0.0)],
            GraphPoint::Edge { edge, offset } => {
                let e = &self.edges[edge];
                vec![(e.a, offset), (e.b, e.len - offset)]
            }
        }
    }

    fn offset_of_node(&self, edge: usize, node: usize) -> f64 {
        if self.edges[edge].a == node {
            0.0
        } else {
            self.edges[edge].len
        }
    }

    pub fn distance(&self, p: &GraphPoint, q: &GraphPoint) -> f64 {
        let mut best = f64::INFINITY;
        if let (GraphPoint::Edge { edge: e1, offset: s1 }, GraphPoint::Edge { edge: e2, offset: s2 }) = (p, q) {
            if e1 == e2 {
                best = (s1 - s2).abs();
            }
        }
        for (u, du) in self.exits(p) {
            for (v, dv) in self.exits(q) {
                best = best.min(du + self.dist[u][v] + dv);
            }
        }
        best
    }

    /// Shortest route from p to q as a list of legs, with a flag set when another
    /// route of the same length exists.
    pub fn route(&self, p: &GraphPoint, q: &GraphPoint) -> Option<(Vec<Leg>, bool)> {
        let mut cands: Vec<(f64, Option<(usize, usize)>)> = Vec::new();
        if let (GraphPoint::Edge { edge: e1, offset: s1 }, GraphPoint::Edge { edge: e2, offset: s2 }) = (p, q) {
            if e1 == e2 {
                cands.push(((s1 - s2).abs(), None));
            }
        }
        if p == q {
            return Some((Vec::new(), false));
        }
        for (u, du) in self.exits(p) {
            for (v, dv) in self.exits(q) {
                let l = du + self.dist[u][v] + dv;
                if l.is_finite() {
                    cands.push((l, Some((u, v))));
                }
            }
        }
        let best = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        if best.is_infinite() {
            return None;
        }
        let near: Vec<_> = cands.iter().filter(|c| c.0 <= best + 1e-12 * (1.0 + best)).collect();
        let first = self.legs_for(p, q, near[0].1);
        // equal-length candidates can describe the same path (e.g. a point sitting on a node)
        let tied = near[1..].iter().any(|c| !same_route(&first, &self.legs_for(p, q, c.1)));
        Some((first, tied))
    }

    fn legs_for(&self, p: &GraphPoint, q: &GraphPoint, choice: Option<(usize, usize)>) -> Vec<Leg> {
        let mut legs = Vec::new();
        match choice {
            None => {
                if let (GraphPoint::Edge { edge, offset: s1 }, GraphPoint::Edge { offset: s2, .. }) = (p, q) {
                    legs.push(Leg { edge: *edge, from: *s1, to: *s2 });
                }
            }
            Some((u, v)) => {
                if let GraphPoint::Edge { edge, offset } = *p {
                    legs.push(Leg { edge, from: offset, to: self.offset_of_node(edge, u) });
                }
                let mut cur = u;
                while cur != v {
                    let (k, next) = self.hop[cur][v].expect("connected nodes have a hop");
                    legs.push(Leg { edge: k, from: self.offset_of_node(k, cur), to: self.offset_of_node(k, next) });
                    cur = next;
                }
                if let GraphPoint::Edge { edge, offset } = *q {
                    legs.push(Leg { edge, from: self.offset_of_node(edge, v), to: offset });
                }
            }
        }
        legs.retain(|l| l.len() > 0.0);
        // a leg that runs back over its predecessor's edge cannot occur on a shortest path,
        // but consecutive legs on one edge in the same direction are merged
        let mut merged: Vec<Leg> = Vec::with_capacity(legs.len());
        for l in legs {
            match merged.last_mut() {
                Some(m) if m.edge == l.edge && (m.to - l.from).abs() < 1e-12 => m.to = l.to,
                _ => merged.push(l),
            }
        }
        merged
    }

    /// The point at arclength `s` along a route.
    pub fn walk(&self, legs: &[Leg], s: f64) -> GraphPoint {
        let mut left = s;
        for leg in legs {
            let l = leg.len();
            if left <= l {
                let dir = (leg.to - leg.from).signum();
                return self.on_edge(leg.edge, leg.from + dir * left);
            }
            left -= l;
        }
        let last = legs.last().expect("non-empty route");
        self.on_edge(last.edge, last.to)
    }

    /// First direction of the route from p toward q: the edge taken and whether
    /// it is traversed toward its `b` endpoint.
    pub fn first_direction(&self, p: &GraphPoint, q: &GraphPoint) -> Option<(usize, bool)> {
        let (legs, _) = self.route(p, q)?;
        legs.first().map(|l| (l.edge, l.to > l.from))
    }

    pub fn point_json(&self, p: &GraphPoint) -> Value {
        match *p {
            GraphPoint::Node(n) => json!({ "node": self.names[n] }),
            GraphPoint::Edge { edge, offset } => {
                let e = &self.edges[edge];
                json!({ "edge": [self.names[e.a], self.names[e.b]], "offset": offset })
            }
        }
    }

    pub fn parse_point(&self, v: &Value) -> Result<GraphPoint> {
        if let Some(n) = v.get("node").and_then(Value::as_str) {
            return self.node_index(n).map(GraphPoint::Node).ok_or_else(|| Error::Invalid(format!("unknown node '{n}'")));
        }
        let ends = v
            .get("edge")
            .and_then(Value::as_array)
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Invalid("graph point needs 'node' or 'edge' + 'offset'".into()))?;
        let name = |i: usize| {
            ends[i]
                .as_str()
                .and_then(|s| self.node_index(s))
                .ok_or_else(|| Error::Invalid("unknown edge endpoint".into()))
        };
        let (a, b) = (name(0)?, name(1)?);
        let (k, flipped) = self.find_edge(a, b).ok_or_else(|| Error::Invalid("no such edge".into()))?;
        let s = f64_field(v, "offset")?;
        let len = self.edges[k].len;
        if !(0.0..=len).contains(&s) {
            return invalid("offset outside the edge");
        }
        Ok(self.on_edge(k, if flipped { len - s } else { s }))
    }

    /// Pieces of the function s ↦ d(q, point at offset s on `edge`): each entry
    /// (lo, hi, slope, intercept) says the distance equals slope·s + intercept on [lo, hi].
    pub fn distance_pieces(&self, edge: usize, q: &GraphPoint) -> Vec<(f64, f64, f64, f64)> {
        let e = &self.edges[edge];
        let da = self.distance(q, &GraphPoint::Node(e.a));
        let db = self.distance(q, &GraphPoint::Node(e.b));
        let mut lines: Vec<(f64, f64)> = Vec::new();
        if da.is_finite() {
            lines.push((1.0, da));
        }
        if db.is_finite() {
            lines.push((-1.0, db + e.len));
        }
        let mut cuts = vec![0.0, e.len];
        if let GraphPoint::Edge { edge: qe, offset } = *q {
            if qe == edge {
                lines.push((1.0, -offset));
                lines.push((-1.0, offset));
                cuts.push(offset);
            }
        }
        if lines.is_empty() {
            return vec![(0.0, e.len, 0.0, f64::INFINITY)];
        }
        for i in 0..lines.len() {
            for j in 0..i {
                let (m1, c1) = lines[i];
                let (m2, c2) = lines[j];
                if m1 != m2 {
                    let s = (c2 - c1) / (m1 - m2);
                    if s > 0.0 && s < e.len {
                        cuts.push(s);
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let on_own = matches!(q, GraphPoint::Edge { edge: qe, .. } if *qe == edge);
            let best = lines
                .iter()
                .enumerate()
                .filter(|(i, &(m, c))| {
                    // the two direct lines are only valid on their own side of q
                    if on_own && *i >= lines.len() - 2 {
                        m * mid + c >= 0.0
                    } else {
                        true
                    }
                })
                .min_by(|a, b| (a.1 .0 * mid + a.1 .1).total_cmp(&(b.1 .0 * mid + b.1 .1)))
                .map(|(_, l)| *l)
                .expect("non-empty");
            out.push((w[0], w[1], best.0, best.1));
        }
        out
    }
}

/// Shortest path between the ends of edge k in the graph with edge k removed.
fn detour_without(adj: &[Vec<usize>], edges: &[Edge], k: usize) -> f64 {
    let n = adj.len();
    let (src, dst) = (edges[k].a, edges[k].b);
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&i| !done[i] && dist[i].is_finite()).min_by(|&i, &j| dist[i].total_cmp(&dist[j])) else {
            break;
        };
        if u == dst {
            break;
        }
        done[u] = true;
        for &m in &adj[u] {
            if m == k {
                continue;
            }
            let e = &edges[m];
            let v = if e.a == u { e.b } else { e.a };
            if dist[u] + e.len < dist[v] {
                dist[v] = dist[u] + e.len;
            }
        }
    }
    dist[dst]
}

fn same_route(a: &[Leg], b: &[Leg]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.edge == y.edge && (x.from - y.from).abs() < 1e-12 && (x.to - y.to).abs() < 1e-12)
}

impl GeodesicSpace for MetricGraph {
    type Point = GraphPoint;

    fn name(&self) -> String {
        let kind = if self.is_tree() { "tree" } else { "graph" };
        format!("{kind}({} nodes, {} edges)", self.names.len(), self.edges.len())
    }

    fn dist(&self, p: &GraphPoint, q: &GraphPoint) -> f64 {
        self.distance(p, q)
    }

    fn geodesic(&self, p: &GraphPoint, q: &GraphPoint, t: f64) -> Result<GraphPoint> {
        let (legs, tied) = self.route(p, q).ok_or_else(|| Error::Invalid("points lie in different components".into()))?;
        if legs.is_empty() {
            return Ok(*p);
        }
        if tied {
            return Err(Error::NonUniqueGeodesic);
        }
        let total: f64 = legs.iter().map(Leg::len).sum();
        Ok(self.walk(&legs, t.clamp(0.0, 1.0) * total))
    }

    /// Loops of length ℓ make a graph CAT(κ) exactly when ℓ ≥ 2π/√κ.
    fn cat_radius(&self, _p: &GraphPoint) -> f64 {
        (self.girth / 4.0).min(self.radius_cap)
    }

    fn curvature_bound(&self) -> Kappa {
        if self.girth.is_infinite() {
            Kappa(0.0)
        } else {
            let k = 2.0 * std::f64::consts::PI / self.girth;
            Kappa(k * k)
        }
    }

    fn regular_radius(&self, p: &GraphPoint) -> f64 {
        match *p {
            GraphPoint::Node(v) => self.incident(v).iter().map(|&e| self.edges[e].len).fold(f64::INFINITY, f64::min),
            GraphPoint::Edge { edge, offset } => offset.min(self.edges[edge].len - offset),
        }
    }

    fn is_nonbranching_from(&self, p: &GraphPoint) -> Option<bool> {
        match p {
            GraphPoint::Node(_) => Some(self.adj.iter().all(|a| a.len() <= 2)),
            GraphPoint::Edge { .. } => Some(self.adj.iter().all(|a| a.len() <= 2)),
        }
    }

    fn angle_at(&self, x: &GraphPoint, y: &GraphPoint, z: &GraphPoint) -> Option<f64> {
        let dy = self.first_direction(x, y)?;
        let dz = self.first_direction(x, z)?;
        Some(if dy == dz { 0.0 } else { std::f64::consts::PI })
    }

    fn exact_barycenter(&self, atoms: &[(GraphPoint, f64)]) -> Option<Result<GraphPoint>> {
        if !self.is_tree() {
            return None;
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let objective = |p: &GraphPoint| atoms.iter().map(|(x, w)| w * self.distance(x, p).powi(2)).sum::<f64>() / total;
        let mut best = (objective(&GraphPoint::Node(0)), GraphPoint::Node(0));
        for n in 0..self.n_nodes() {
            let p = GraphPoint::Node(n);
            let f = objective(&p);
            if f < best.0 {
                best = (f, p);
            }
        }
        // on each piece every squared distance is (s − c)²; the piece minimizer is a weighted mean
        for (k, e) in self.edges.iter().enumerate() {
            let pieces: Vec<_> = atoms.iter().map(|(x, w)| (self.distance_pieces(k, x), *w)).collect();
            let mut cuts: Vec<f64> = pieces.iter().flat_map(|(ps, _)| ps.iter().map(|p| p.0)).collect();
            cuts.push(e.len);
            cuts.sort_by(|a, b| a.total_cmp(b));
            cuts.dedup();
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let (mut num, mut den) = (0.0, 0.0);
                for (ps, wt) in &pieces {
                    let piece = ps.iter().find(|p| p.0 <= mid && mid <= p.1).expect("pieces cover the edge");
                    // slope·s + c = ±(s − centre)
                    let centre = -piece.3 / piece.2;
                    num += wt * centre;
                    den += wt;
                }
                let s = (num / den).clamp(w[0], w[1]);
                let p = self.on_edge(k, s);
                let f = objective(&p);
                if f < best.0 {
                    best = (f, p);
                }
            }
        }
        Some(Ok(best.1))
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> GraphPoint {
        let total: f64 = self.edges.iter().map(|e| e.len).sum();
        let mut u = rng.random::<f64>() * total;
        for (k, e) in self.edges.iter().enumerate() {
            if u < e.len {
                return self.on_edge(k, u);
            }
            u -= e.len;
        }
        GraphPoint::Node(self.edges.last().map_or(0, |e| e.b))
    }

    fn sample_base_point<R: Rng + ?Sized>(&self, rng: &mut R) -> GraphPoint {
        if rng.random::<f64>() < 0.5 {
            GraphPoint::Node(rng.random_range(0..self.n_nodes()))
        } else {
            self.sample_point(rng)
        }
    }

    fn point_to_json(&self, p: &GraphPoint) -> Value {
        self.point_json(p)
    }

    fn point_from_json(&self, v: &Value) -> Result<GraphPoint> {
        self.parse_point(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn leg(g: &MetricGraph, name: &str, s: f64) -> GraphPoint {
        let (k, flipped) = g.find_edge(0, g.node_index(name).unwrap()).unwrap();
        g.on_edge(k, if flipped { 1.0 - s } else { s })
    }

    #[test]
    fn tripod_distances() {
        let g = MetricGraph::tripod();
        let p = leg(&g, "a", 0.4);
        let q = leg(&g, "b", 0.7);
        assert_abs_diff_eq!(g.dist(&p, &q), 1.1, epsilon = 1e-15);
        let m = g.midpoint(&leg(&g, "a", 0.8), &leg(&g, "b", 0.8)).unwrap();
        assert_eq!(m, GraphPoint::Node(0));
        assert!(g.is_tree());
        assert_eq!(g.curvature_bound(), Kappa(0.0));
    }

    #[test]
    fn geodesic_walks_through_hub() {
        let g = MetricGraph::tripod();
        let p = leg(&g, "a", 0.5);
        let q = leg(&g, "b", 0.5);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let x = g.geodesic(&p, &q, t).unwrap();
            assert_abs_diff_eq!(g.dist(&p, &x), t, epsilon = 1e-14);
            assert_abs_diff_eq!(g.dist(&x, &q), 1.0 - t, epsilon = 1e-14);
        }
    }

    #[test]
    fn cycle_girth_and_ties() {
        let g = MetricGraph::from_named(&["a", "b", "c"], &[("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)]).unwrap();
        assert_abs_diff_eq!(g.girth(), 3.0);
        let p = GraphPoint::Node(0);
        let q = g.on_edge(1, 0.5);
        assert_abs_diff_eq!(g.dist(&p, &q), 1.5);
        assert_eq!(g.geodesic(&p, &q, 0.5), Err(Error::NonUniqueGeodesic));
    }

    #[test]
    fn distance_pieces_match_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = MetricGraph::random_connected(8, 4, &mut rng);
        for _ in 0..20 {
            let q = g.sample_point(&mut rng);
            for k in 0..g.edges().len() {
                for (lo, hi, m, c) in g.distance_pieces(k, &q) {
                    for f in [0.1, 0.5, 0.9] {
                        let s = lo + f * (hi - lo);
                        let want = g.dist(&q, &g.on_edge(k, s));
                        assert_abs_diff_eq!(m * s + c, want, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn tree_barycenter_examples() {
        let g = MetricGraph::tripod();
        let atoms: Vec<_> = (1..4).map(|n| (GraphPoint::Node(n), 1.0 / 3.0)).collect();
        assert_eq!(g.exact_barycenter(&atoms).unwrap().unwrap(), GraphPoint::Node(0));
        let seg = MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)]).unwrap();
        let atoms = vec![(GraphPoint::Node(0), 0.7), (GraphPoint::Node(1), 0.3)];
        match seg.exact_barycenter(&atoms).unwrap().unwrap() {
            GraphPoint::Edge { offset, .. } => assert_abs_diff_eq!(offset, 0.3, epsilon = 1e-15),
            p => panic!("{p:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let g = MetricGraph::tripod();
        let p = leg(&g, "c", 0.25);
        assert_eq!(g.parse_point(&g.point_json(&p)).unwrap(), p);
        let v = serde_json::json!({"edge": ["a", "o"], "offset": 0.75});
        assert_eq!(g.parse_point(&v).unwrap(), leg(&g, "a", 0.25));
    }

    #[test]
    fn graph_json_round_trip() {
        let g = MetricGraph::from_json(&json!({"edges": [["a", "b", 1.0], ["b", "c", 2.5], ["c", "a", 1.5]]})).unwrap();
        assert_eq!(g.names(), ["a", "b", "c"]);
        assert_eq!(MetricGraph::from_json(&g.to_json()).unwrap().to_json(), g.to_json());
        assert!(MetricGraph::from_json(&json!({"nodes": ["a"], "edges": [["a", "b", 1.0]]})).is_err());
        assert!(MetricGraph::from_json(&json!({"edges": [["a", "b"]]})).is_err());
    }
}
