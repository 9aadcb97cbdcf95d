//! Report schema and its JSON and CSV renderings.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tangent_core::degree_mc::McEstimate;
use tangent_core::lambda_evolution::{EvolutionTrace, ScalingReport};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Column list of the CSV rendering.
pub const CSV_HEADER: &str = "record,name,index,value,stderr,n,target,tolerance,passed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value − target| <= tolerance`.
    Within,
    /// `value >= target`.
    AtLeast,
    /// `value <= target`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Check {
    pub fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let passed = (value - target).abs() <= tolerance;
        Self { name: name.into(), value, target, tolerance, comparison: Comparison::Within, passed }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, comparison: Comparison::AtLeast, passed: value >= bound }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, comparison: Comparison::AtMost, passed: value <= bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub level: u32,
    pub eps: f64,
    pub active: usize,
    pub det2: f64,
    pub det2_gap: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSummary {
    pub max_abs_eigenvalue: f64,
    pub exact_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub picard_update_norms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub experiment: String,
    pub passed: bool,
    pub jump_count: usize,
    pub active_count: usize,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub estimates: Vec<NamedEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<EvolutionTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Vec<TruncationRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

pub fn to_json(report: &Report) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Shortest round-tripping text, with an exponent for very small or large values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Long-format CSV: one row per check, estimate, trace value, scaling row and
/// truncation level, followed by a summary row.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut row = |record: &str, name: &str, index: Option<usize>, value: f64, rest: [String; 5]| {
        let index = index.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{record},{name},{index},{},{}", num(value), rest.join(","));
    };
    let blank = || [String::new(), String::new(), String::new(), String::new(), String::new()];
    for c in &report.checks {
        row("check", &c.name, None, c.value, [String::new(), String::new(), num(c.target), num(c.tolerance), c.passed.to_string()]);
    }
    for e in &report.estimates {
        let est = &e.estimate;
        row("estimate", &e.name, None, est.mean, [num(est.stderr), est.n.to_string(), opt(est.target), String::new(), String::new()]);
    }
    if let Some(trace) = &report.trace {
        for (i, r) in trace.records.iter().enumerate() {
            for (name, v) in [
                ("time", r.time),
                ("lambda", r.lambda),
                ("xi", r.xi),
                ("sde_factor", r.sde_factor),
                ("closed_form_factor", r.closed_form_factor),
                ("sde_running", r.sde_running),
                ("closed_form_running", r.closed_form_running),
            ] {
                row("trace", name, Some(i), v, blank());
            }
        }
    }
    if let Some(scaling) = &report.scaling {
        for (i, r) in scaling.rows.iter().enumerate() {
            row("scaling", "scale", Some(i), r.scale, blank());
            row("scaling", "max_difference", Some(i), r.max_difference, blank());
        }
    }
    if let Some(rows) = &report.truncation {
        for r in rows {
            let i = Some(r.level as usize);
            row("truncation", "eps", i, r.eps, blank());
            row("truncation", "active", i, r.active as f64, blank());
            row("truncation", "det2", i, r.det2, blank());
            row("truncation", "det2_gap", i, r.det2_gap, blank());
            row("truncation", "distance", i, r.distance, blank());
        }
    }
    if let Some(d) = report.duration_seconds {
        row("timing", "duration_seconds", None, d, blank());
    }
    let passed = report.checks.iter().filter(|c| c.passed).count();
    let _ = writeln!(
        out,
        "summary,{},,{passed},,{},,,{}",
        report.experiment,
        report.checks.len(),
        report.passed
    );
    out
}

pub fn render(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => Ok(to_csv(report)),
    }
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Renders `report` and writes it to `path` or standard output.
pub fn emit(report: &Report, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    write_output(&render(report, format)?, path)
}
