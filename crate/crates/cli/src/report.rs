use std::fmt::Write;

use serde::Serialize;

use crate::Common;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            pass,
            witness: None,
            detail: None,
        }
    }

    pub fn witness(mut self, w: Option<String>) -> Self {
        self.witness = w;
        self
    }

    pub fn detail(mut self, d: serde_json::Value) -> Self {
        self.detail = Some(d);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub seed: u64,
    pub trials: usize,
    pub degree: u32,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl Report {
    pub fn new(command: &str, c: &Common) -> Self {
        Report {
            command: command.to_string(),
            pass: true,
            seed: c.seed,
            trials: c.trials,
            degree: c.degree,
            checks: Vec::new(),
            timing_ms: None,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = write!(out, "{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            match (&c.witness, c.pass) {
                (Some(w), false) => {
                    let _ = writeln!(out, ": {w}");
                }
                _ => out.push('\n'),
            }
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(out, "{}: {passed}/{} checks passed", self.command, self.checks.len());
        out
    }
}
