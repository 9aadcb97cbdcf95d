//! Running every config in a directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
use crate::report::{Format, Report};
use crate::run::{run, RunOptions};

pub const SUITE_CSV_HEADER: &str = "file,experiment,passed,checks,failed_checks,error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub file: String,
    pub experiment: Option<String>,
    pub passed: bool,
    pub checks: usize,
    pub failed_checks: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteSummary {
    pub fn exit_code(&self) -> i32 {
        if self.entries.iter().any(|e| e.error.is_some()) {
            EXIT_ERROR
        } else if self.entries.iter().all(|e| e.passed) {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut text = serde_json::to_string_pretty(self)?;
                text.push('\n');
                Ok(text)
            }
            Format::Csv => {
                let mut out = String::from(SUITE_CSV_HEADER);
                out.push('\n');
                for e in &self.entries {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        csv_field(&e.file),
                        e.experiment.as_deref().unwrap_or(""),
                        e.passed,
                        e.checks,
                        e.failed_checks.join(";"),
                        csv_field(e.error.as_deref().unwrap_or("")),
                    );
                }
                Ok(out)
            }
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `*.json` files in `dir`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |source| CliError::Io { path: dir.to_path_buf(), source };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    ExperimentConfig::from_json(&text)
}

/// Runs every config in `dir`; `seed` overrides each config's seed.
pub fn run_suite(dir: &Path, seed: Option<u64>, options: &RunOptions) -> Result<(SuiteSummary, Vec<Report>), CliError> {
    let mut entries = Vec::new();
    let mut reports = Vec::new();
    for path in config_files(dir)? {
        let file = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let outcome = load_config(&path).and_then(|mut config| {
            if seed.is_some() {
                config.seed = seed;
            }
            run(&config, options)
        });
        match outcome {
            Ok(report) => {
                entries.push(SuiteEntry {
                    file,
                    experiment: Some(report.experiment.clone()),
                    passed: report.passed,
                    checks: report.checks.len(),
                    failed_checks: report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect(),
                    error: None,
                });
                reports.push(report);
            }
            Err(e) => entries.push(SuiteEntry {
                file,
                experiment: None,
                passed: false,
                checks: 0,
                failed_checks: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    Ok((SuiteSummary { entries }, reports))
}
