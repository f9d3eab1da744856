//! Machine-readable results of a scenario run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hjsub::hjsolver::{ConvergenceRow, SolveDiagnostics};
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Pass iff `measured <= tolerance`.
    AtMost,
    /// Pass iff `measured >= tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        // NaN never passes
        Self { name: name.into(), measured, tolerance, comparison: Comparison::AtMost, pass: measured <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, comparison: Comparison::AtLeast, pass: measured >= tolerance }
    }

    /// Recomputes the verdict from the recorded numbers.
    pub fn verdict(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.measured <= self.tolerance,
            Comparison::AtLeast => self.measured >= self.tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// A hypothesis of the scenario does not hold; nothing was solved.
    HypothesisViolated,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::HypothesisViolated => 2,
        }
    }
}

/// Wall-clock time; not part of the deterministic content.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub diagnostics: BTreeMap<String, SolveDiagnostics>,
    pub tables: BTreeMap<String, Vec<ConvergenceRow>>,
    /// Additional measured quantities that carry no verdict.
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub timing: Timing,
}

impl Report {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            outcome: Outcome::Pass,
            checks: Vec::new(),
            diagnostics: BTreeMap::new(),
            tables: BTreeMap::new(),
            values: BTreeMap::new(),
            notes: Vec::new(),
            timing: Timing { wall_seconds: 0.0 },
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// Sets the outcome from the checks unless the hypothesis was violated.
    pub fn finish(&mut self) {
        if self.outcome != Outcome::HypothesisViolated {
            self.outcome = if self.checks.iter().all(|c| c.pass) { Outcome::Pass } else { Outcome::Fail };
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The report without its timing, for determinism comparisons.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        v.as_object_mut().expect("object").remove("timing");
        serde_json::to_string_pretty(&v).expect("values serialize")
    }

    /// One row per check: `name,measured,tolerance,comparison,pass`.
    pub fn checks_csv(&self) -> String {
        let mut out = String::from("name,measured,tolerance,comparison,pass\n");
        for c in &self.checks {
            let cmp = match c.comparison {
                Comparison::AtMost => "at_most",
                Comparison::AtLeast => "at_least",
            };
            writeln!(out, "{},{:e},{:e},{},{}", c.name, c.measured, c.tolerance, cmp, c.pass).expect("string write");
        }
        out
    }

    /// Convergence tables as `table,dx,error,order`.
    pub fn tables_csv(&self) -> String {
        let mut out = String::from("table,dx,error,order\n");
        for (name, rows) in &self.tables {
            for r in rows {
                let order = r.order.map(|o| format!("{o}")).unwrap_or_default();
                writeln!(out, "{name},{:e},{:e},{order}", r.dx, r.error).expect("string write");
            }
        }
        out
    }
}
