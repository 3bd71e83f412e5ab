//! Experiments that check the construction against exact oracles, analytic
//! constants and finite inequalities, with machine-readable reports.

mod experiments;
mod oracle;

pub use experiments::*;
pub use oracle::{expm, CtmcOracle, DENSE_CAP, STATE_CAP};

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Where a numeric target comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed-form constant such as `π²/3`.
    Analytic,
    /// Right side of a proven inequality.
    Inequality,
    /// Exact computation (matrix exponential, exact enumeration).
    Oracle,
    /// Structural property that must hold exactly.
    Property,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value ≤ target + tolerance`.
    AtMost,
    /// `|value − target| ≤ tolerance`.
    Within,
    /// Reported only.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub passed: bool,
}

impl Measurement {
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        target: f64,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        Measurement {
            name: name.into(),
            value,
            target: Some(target),
            tolerance,
            comparison: Comparison::AtMost,
            provenance: Some(provenance),
            passed: value <= target + tolerance,
        }
    }

    pub fn within(
        name: impl Into<String>,
        value: f64,
        target: f64,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        Measurement {
            name: name.into(),
            value,
            target: Some(target),
            tolerance,
            comparison: Comparison::Within,
            provenance: Some(provenance),
            passed: (value - target).abs() <= tolerance,
        }
    }

    /// A count of violations that must be zero.
    pub fn zero(name: impl Into<String>, count: usize) -> Self {
        Self::at_most(name, count as f64, 0.0, 0.0, Provenance::Property)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Measurement {
            name: name.into(),
            value,
            target: None,
            tolerance: 0.0,
            comparison: Comparison::Info,
            provenance: None,
            passed: true,
        }
    }
}

/// Wall-clock data, kept apart so the rest of a report is reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub parameters: serde_json::Value,
    pub measurements: Vec<Measurement>,
    pub replicas: usize,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub meta: ReportMeta,
}

impl ExperimentReport {
    pub fn new(id: impl Into<String>, parameters: serde_json::Value) -> Self {
        ExperimentReport {
            id: id.into(),
            parameters,
            measurements: Vec::new(),
            replicas: 0,
            passed: true,
            notes: Vec::new(),
            meta: ReportMeta::default(),
        }
    }

    pub fn push(&mut self, m: Measurement) {
        self.passed &= m.passed;
        self.measurements.push(m);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub(crate) fn finish(mut self, start: Instant) -> Self {
        self.meta.runtime_seconds = start.elapsed().as_secs_f64();
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.passed)
    }
}

/// Reports sorted by id, so merged output does not depend on scheduling.
pub fn merge_reports(mut reports: Vec<ExperimentReport>) -> Vec<ExperimentReport> {
    reports.sort_by(|a, b| a.id.cmp(&b.id));
    reports
}

/// Plain-text summary, one line per measurement.
pub fn render_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<34} {:<40} {:>14} {:>14} {:>10}  {:<11} result",
        "experiment", "measurement", "value", "target", "tol", "provenance"
    );
    for r in reports {
        for m in &r.measurements {
            let target = m.target.map_or_else(|| "-".to_string(), |t| format!("{t:.6e}"));
            let prov = m.provenance.map_or("-".to_string(), |p| {
                serde_json::to_value(p)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default()
            });
            let op = match m.comparison {
                Comparison::AtMost => "<=",
                Comparison::Within => "~=",
                Comparison::Info => "",
            };
            let _ = writeln!(
                out,
                "{:<34} {:<40} {:>14.6e} {:>2}{:>12} {:>10.1e}  {:<11} {}",
                r.id,
                m.name,
                m.value,
                op,
                target,
                m.tolerance,
                prov,
                if m.passed { "ok" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "{:<34} {} ({} replicas, {:.2}s)",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.replicas,
            r.meta.runtime_seconds
        );
    }
    out
}
