//! Flat check reports: `{checks: [{name, slack, tol, pass}]}` plus a CSV mirror.

use serde::{Deserialize, Serialize};

/// `slack` is the observed defect; a check passes when it does not exceed `tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, slack: f64, tol: f64) -> Self {
        Check { name: name.into(), slack, tol, pass: slack <= tol }
    }

    /// A check that must come out true, e.g. a negative control firing.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), slack: if ok { 0.0 } else { 1.0 }, tol: 0.0, pass: ok }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,slack,tol,pass\n");
        for c in &self.checks {
            let name = if c.name.contains([',', '"']) { format!("\"{}\"", c.name.replace('"', "\"\"")) } else { c.name.clone() };
            out.push_str(&format!("{},{:e},{:e},{}\n", name, c.slack, c.tol, c.pass));
        }
        out
    }
}

/// Running maximum of a defect, turned into a single check.
#[derive(Clone, Debug)]
pub struct Worst {
    name: String,
    tol: f64,
    slack: f64,
    count: usize,
}

impl Worst {
    pub fn new(name: impl Into<String>, tol: f64) -> Self {
        Worst { name: name.into(), tol, slack: f64::NEG_INFINITY, count: 0 }
    }

    pub fn see(&mut self, slack: f64) {
        self.count += 1;
        if slack > self.slack || slack.is_nan() {
            self.slack = slack;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn check(&self) -> Check {
        let slack = if self.count == 0 { 0.0 } else { self.slack };
        Check::new(format!("{} (n={})", self.name, self.count), slack, self.tol)
    }
}
