//! Browser entry points. Every function returns a JSON string so the page can stay
//! plain JavaScript.

use catcalc::barycenter::{solve_barycenter, variance_certificate, DiscreteMeasure, SolverOptions};
use catcalc::counterexample::lip_counterexample;
use catcalc::graph::GraphPoint;
use catcalc::instances::Instance;
use catcalc::model::{comparison_angle, Kappa};
use catcalc::par::sample_rng;
use catcalc::suites::CatSuite;
use catcalc::{GeodesicSpace, MetricGraph};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> String {
    json!({ "error": e.to_string() }).to_string()
}

/// Comparison angle at x for sides d(x,y0), d(x,y1), d(y0,y1) in the κ-plane, plus
/// the Euclidean and hyperbolic values for contrast.
#[wasm_bindgen]
pub fn comparison_angles(kappa: f64, a: f64, b: f64, c: f64) -> String {
    let at = |k: f64| comparison_angle(Kappa(k), a, b, c).map(|x| json!(x)).unwrap_or_else(|e| json!(e.to_string()));
    json!({ "kappa": at(kappa), "euclidean": at(0.0), "hyperbolic": at(-1.0) }).to_string()
}

/// The four-point comparison suite on a bundled instance, by label.
#[wasm_bindgen]
pub fn cat_check(label: &str, n: usize, seed: u64) -> String {
    let Some(inst) = Instance::from_label(label) else { return fail(format!("unknown instance {label}")) };
    match inst.build().visit(CatSuite { n, seed, tol: 1e-9, kappa: None }) {
        Ok(r) => serde_json::to_string(&r).expect("report serializes"),
        Err(e) => fail(e),
    }
}

/// Barycenter on the unit tripod of three atoms, atom i sitting at distance `r[i]`
/// from the hub on leg i with weight `w[i]`.
#[wasm_bindgen]
pub fn tripod_barycenter(r: &[f64], w: &[f64]) -> String {
    if r.len() != 3 || w.len() != 3 {
        return fail("three radii and three weights are required");
    }
    let g = MetricGraph::tripod();
    let atoms: Vec<(GraphPoint, f64)> = (0..3).map(|i| (g.on_edge(i, r[i].clamp(0.0, 1.0)), w[i])).collect();
    let mu = match DiscreteMeasure::new(atoms) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let res = match solve_barycenter(&g, &mu, &SolverOptions::default()) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let mut rng = sample_rng(1, 0);
    let probes: Vec<GraphPoint> = (0..200).map(|_| g.sample_point(&mut rng)).collect();
    let (leg, dist) = match res.point {
        GraphPoint::Node(_) => (Value::Null, 0.0),
        GraphPoint::Edge { edge, offset } => (json!(edge), offset),
    };
    json!({
        "point": g.point_json(&res.point),
        "leg": leg,
        "hub_distance": dist,
        "variance_certificate": variance_certificate(&g, &mu, &res.point, &probes),
    })
    .to_string()
}

/// lip-based parallelogram on (R, delta_0) for f = |x|, g = x.
#[wasm_bindgen]
pub fn counterexample() -> String {
    serde_json::to_string(&lip_counterexample()).expect("result serializes")
}
