//! Structured pass/fail audit records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pauli::RNG_ALGORITHM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    /// A precondition failed; the conclusions were not checked.
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Passes when `measured <= threshold`.
    AtMost,
    /// Passes when `measured >= threshold`.
    AtLeast,
}

/// One measured quantity compared against its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Which stated fact the check embodies, e.g. `"Eq.3"` or `"Thm"`.
    pub tag: String,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngInfo {
    pub algorithm: String,
    pub seed: u64,
}

impl RngInfo {
    pub fn new(seed: u64) -> Self {
        Self { algorithm: RNG_ALGORITHM.to_string(), seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub title: String,
    pub status: Status,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Reported quantities that are not asserted.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<RngInfo>,
}

impl AuditReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), status: Status::Passed, checks: Vec::new(), notes: Vec::new(), metrics: BTreeMap::new(), rng: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = Some(RngInfo::new(seed));
        self
    }

    fn push(&mut self, name: &str, tag: &str, measured: f64, threshold: f64, relation: Relation) -> bool {
        let passed = match relation {
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
        };
        self.checks.push(Check {
            name: name.to_string(),
            tag: tag.to_string(),
            measured,
            threshold,
            relation,
            passed,
        });
        if !passed && self.status == Status::Passed {
            self.status = Status::Failed;
        }
        passed
    }

    /// Records `measured <= threshold`; NaN fails.
    pub fn at_most(&mut self, name: &str, tag: &str, measured: f64, threshold: f64) -> bool {
        self.push(name, tag, measured, threshold, Relation::AtMost)
    }

    /// Records `measured >= threshold`; NaN fails.
    pub fn at_least(&mut self, name: &str, tag: &str, measured: f64, threshold: f64) -> bool {
        self.push(name, tag, measured, threshold, Relation::AtLeast)
    }

    /// Records a boolean condition as `1 >= 1` or `0 >= 1`.
    pub fn require(&mut self, name: &str, tag: &str, ok: bool) -> bool {
        self.push(name, tag, if ok { 1.0 } else { 0.0 }, 1.0, Relation::AtLeast)
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn mark_not_applicable(&mut self, reason: impl Into<String>) {
        self.status = Status::NotApplicable;
        self.notes.push(reason.into());
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest measured value among checks whose name starts with `prefix`.
    pub fn worst(&self, prefix: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.measured)
            .reduce(f64::max)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Folds another report's checks and notes into this one.
    pub fn absorb(&mut self, other: AuditReport) {
        for c in other.checks {
            if !c.passed && self.status == Status::Passed {
                self.status = Status::Failed;
            }
            self.checks.push(c);
        }
        for n in other.notes {
            self.notes.push(format!("[{}] {}", other.title, n));
        }
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{}: {}", other.title, k), v);
        }
        if other.status == Status::NotApplicable && self.status == Status::Passed {
            self.status = Status::NotApplicable;
        }
    }
}
