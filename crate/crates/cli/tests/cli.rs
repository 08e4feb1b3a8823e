use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn catcalc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catcalc")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn verify_cat_on_a_space_file() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "euclid.json", r#"{"type":"model","kappa":0}"#);
    let o = catcalc(&["verify", "cat", "--space", "euclid.json"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn hilbert_on_the_bundled_tree() {
    let d = tempfile::tempdir().unwrap();
    let o = catcalc(&["instance", "random-tree-15"], d.path());
    std::fs::write(d.path().join("tree15.json"), &o.stdout).unwrap();
    let o = catcalc(&["hilbert", "--graph", "tree15.json", "--n", "20"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o)["max_slack"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn hilbert_reads_a_flow_directory() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "g.json", r#"{"edges":[["a","b",1.0],["b","c",1.0],["b","d",2.0]]}"#);
    std::fs::create_dir(d.path().join("flows")).unwrap();
    write(d.path(), "flows/1.json", r#"{"flow":[["a","b",1.0],["b","c",1.0]]}"#);
    write(d.path(), "flows/2.json", r#"{"flow":[["d","b",0.5],["b","c",0.5]]}"#);
    let o = catcalc(&["hilbert", "--graph", "g.json", "--flows", "flows"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_input_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.json", "{not json");
    assert_eq!(catcalc(&["verify", "cat", "--space", "bad.json"], d.path()).status.code(), Some(2));
    assert_eq!(catcalc(&["verify", "cat", "--space", "missing.json"], d.path()).status.code(), Some(2));
    assert_eq!(catcalc(&["superpose", "--graph", "bad.json", "--flow", "bad.json"], d.path()).status.code(), Some(2));
    assert_eq!(catcalc(&["verify", "cat", "--tol", "-1"], d.path()).status.code(), Some(2));
    assert_eq!(catcalc(&["verify", "nonsense"], d.path()).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_catcalc")).args(["counterexample"]).env("CATCALC_WORKERS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_negative_control_exits_nonzero() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "g.json", r#"{"edges":[["a","b",1.0]]}"#);
    write(d.path(), "f.json", r#"{"flow":[["a","b",1.0]]}"#);
    write(d.path(), "m.json", r#"{"atoms":[]}"#);
    let runs: [&[&str]; 9] = [
        &["verify", "cat"],
        &["verify", "angles"],
        &["verify", "cone-calc"],
        &["verify", "curves"],
        &["barycenter", "--space", "tripod", "--measure", "m.json"],
        &["superpose", "--graph", "g.json", "--flow", "f.json"],
        &["embed", "--graph", "g.json", "--flow", "f.json"],
        &["hilbert"],
        &["counterexample"],
    ];
    for args in runs {
        let mut a = args.to_vec();
        a.extend(["--negative-control", "--n", "50"]);
        assert_eq!(catcalc(&a, d.path()).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn reports_are_deterministic_across_worker_counts() {
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_catcalc"))
            .args(["verify", "cone-calc", "--n", "40", "--seed", "11"])
            .env("CATCALC_WORKERS", workers)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn barycenter_superpose_and_embed() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "m.json",
        r#"{"atoms":[{"point":{"node":"a"},"weight":2},{"point":{"node":"b"},"weight":2},{"point":{"node":"c"},"weight":2}]}"#,
    );
    let o = catcalc(&["barycenter", "--space", "tripod", "--measure", "m.json"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["result"]["point"]["node"], "o");

    write(d.path(), "g.json", r#"{"edges":[["a","b",1.0],["b","c",2.0],["c","a",1.5],["c","d",1.0]],"density":[1,2,1,0.5]}"#);
    write(d.path(), "f.json", r#"{"flow":[["a","b",0.7],["b","c",0.7],["c","d",0.2],["c","a",0.5]]}"#);
    let o = catcalc(&["superpose", "--graph", "g.json", "--flow", "f.json"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let dec = &json(&o)["decomposition"];
    assert_eq!(dec["paths"].as_array().unwrap().len(), 1);
    assert_eq!(dec["cycles"].as_array().unwrap().len(), 1);

    let o = catcalc(&["embed", "--graph", "g.json", "--flow", "f.json", "--grid", "9", "--out", "embed.json"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("embed.json")).unwrap()).unwrap();
    assert_eq!(r["points"].as_array().unwrap().len(), 36);
    let csv = std::fs::read_to_string(d.path().join("embed.csv")).unwrap();
    assert!(csv.starts_with("name,slack,tol,pass"));
}

#[test]
fn counterexample_reports_eight_versus_four() {
    let d = tempfile::tempdir().unwrap();
    let o = catcalc(&["counterexample"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["result"]["left"], 8.0);
    assert_eq!(r["result"]["right"], 4.0);
}
