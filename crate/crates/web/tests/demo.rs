use catcalc_web::{cat_check, comparison_angles, counterexample, tripod_barycenter};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn equilateral_angles() {
    let v = parse(comparison_angles(1.0, 1.0, 1.0, 1.0));
    assert!((v["euclidean"].as_f64().unwrap() - std::f64::consts::FRAC_PI_3).abs() < 1e-12);
    assert!(v["kappa"].as_f64().unwrap() > v["euclidean"].as_f64().unwrap());
    assert!(v["hyperbolic"].as_f64().unwrap() < v["euclidean"].as_f64().unwrap());
    assert!(parse(comparison_angles(0.0, 1.0, 1.0, 3.0))["kappa"].is_string());
}

#[test]
fn cat_check_passes_and_rejects_unknown_labels() {
    let v = parse(cat_check("tripod", 100, 3));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!(parse(cat_check("torus", 10, 0))["error"].is_string());
}

#[test]
fn tripod_barycenter_cases() {
    let v = parse(tripod_barycenter(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]));
    assert_eq!(v["point"]["node"], "o");
    assert!(v["variance_certificate"].as_f64().unwrap() >= -1e-9);
    // a heavy atom on leg a pulls the barycenter onto that leg: (3 - 1 - 1) / 5 = 0.2
    let v = parse(tripod_barycenter(&[1.0, 1.0, 1.0], &[3.0, 1.0, 1.0]));
    assert_eq!(v["leg"], 0);
    assert!((v["hub_distance"].as_f64().unwrap() - 0.2).abs() < 1e-10);
    assert!(parse(tripod_barycenter(&[1.0], &[1.0]))["error"].is_string());
}

#[test]
fn counterexample_sides() {
    let v = parse(counterexample());
    assert_eq!((v["left"].as_f64(), v["right"].as_f64()), (Some(8.0), Some(4.0)));
}
