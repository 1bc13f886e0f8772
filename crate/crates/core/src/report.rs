//! Outcome of a single inequality check.
//!
//! Every check is phrased as `lhs <= rhs`. The reported `gap` is the slack
//! `rhs - lhs`, so strict inequalities have a positive gap and a check passes
//! when `gap >= -tolerance`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A theorem hypothesis does not hold; the inequality is informational.
    HypothesisFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisState {
    Satisfied,
    Failed,
    /// Outside the theorem's stated range but numerically meaningful
    /// (e.g. the `m = infinity` limit).
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: Status,
    pub equality: bool,
    pub equality_tolerance: f64,
    pub hypotheses: BTreeMap<String, HypothesisState>,
    pub details: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub history: Vec<LevelRecord>,
}

impl CheckReport {
    /// Report for `lhs <= rhs` with absolute `tolerance`.
    pub fn inequality(check: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let gap = rhs - lhs;
        let scale = if lhs != 0.0 { lhs.abs() } else { rhs.abs() };
        let relative_gap = if scale > 0.0 { gap / scale } else { 0.0 };
        let pass = gap >= -tolerance && gap.is_finite();
        CheckReport {
            check: check.to_string(),
            lhs,
            rhs,
            gap,
            relative_gap,
            tolerance,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            equality: false,
            equality_tolerance: 0.0,
            hypotheses: BTreeMap::new(),
            details: BTreeMap::new(),
            notes: Vec::new(),
            history: Vec::new(),
        }
    }

    /// Report for the identity `lhs = rhs`: passes when `|gap| <= tolerance`.
    pub fn identity(check: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let mut r = CheckReport::inequality(check, lhs, rhs, tolerance);
        r.pass = r.gap.abs() <= tolerance;
        r.status = if r.pass { Status::Pass } else { Status::Fail };
        r
    }

    /// Flags equality when `|gap| <= rel_tol * |lhs|`.
    pub fn with_equality_tolerance(mut self, rel_tol: f64) -> Self {
        self.equality_tolerance = rel_tol;
        self.equality = self.relative_gap.abs() < rel_tol;
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn hypothesis(mut self, name: &str, state: HypothesisState) -> Self {
        self.hypotheses.insert(name.to_string(), state);
        if state == HypothesisState::Failed {
            self.status = Status::HypothesisFailed;
        }
        self
    }

    pub fn is_failure(&self) -> bool {
        self.status == Status::Fail
    }
}
