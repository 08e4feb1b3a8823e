//! One PASS/FAIL line per acceptance criterion. Runs without the libtest harness so the
//! lines always reach stdout.

use std::time::{Duration, Instant};

use catcalc::counterexample::lip_counterexample;
use catcalc::report::Report;
use catcalc::suites;
use catcalc::Result;

const SEED: u64 = 20240917;

struct Outcome {
    ok: bool,
    detail: String,
}

fn from_report(r: Result<Report>, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match r {
        Err(e) => Outcome { ok: false, detail: format!("error: {e}") },
        Ok(r) => {
            let failures: Vec<String> = r.failures().map(|c| format!("{} (slack {:e}, tol {:e})", c.name, c.slack, c.tol)).collect();
            let slow = budget.is_some_and(|b| elapsed > b);
            let mut detail = format!("{} checks, {:.2?}", r.checks.len(), elapsed);
            if slow {
                detail += &format!(", over budget {:?}", budget.unwrap());
            }
            if !failures.is_empty() {
                detail += &format!(", failing: {}", failures.join("; "));
            }
            Outcome { ok: failures.is_empty() && !slow, detail }
        }
    }
}

fn timed(budget: Option<u64>, f: impl FnOnce() -> Result<Report>) -> Outcome {
    let t = Instant::now();
    let r = f();
    from_report(r, t.elapsed(), budget.map(Duration::from_secs))
}

fn main() {
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("1 CAT comparison suite", Box::new(|| timed(Some(30), || suites::cat_suite(1000, SEED, 1e-9, true)))),
        ("2 cone calculus suite", Box::new(|| timed(Some(60), || suites::cone_calculus_suite(200, SEED, 1e-8)))),
        ("3 first variation", Box::new(|| timed(None, || suites::first_variation_suite(100, SEED, 1e-7)))),
        ("4 antipodality", Box::new(|| timed(None, || suites::curves_suite(50, SEED, 1e-6)))),
        ("5 barycenter", Box::new(|| timed(None, || suites::barycenter_suite(20, SEED)))),
        ("6 superposition", Box::new(|| timed(None, || suites::transport_suite(50, SEED, 20)))),
        ("7 embedding", Box::new(|| timed(None, || suites::embedding_suite(10, SEED, 20)))),
        ("8 hilbertianity", Box::new(|| timed(Some(120), || suites::hilbert_suite(20, SEED).map(|(r, _)| r)))),
        (
            "9 counterexample",
            Box::new(|| {
                let c = lip_counterexample();
                Outcome { ok: c.left == 8.0 && c.right == 4.0, detail: format!("sides {} vs {}", c.left, c.right) }
            }),
        ),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("{} criterion {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        if !o.ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
