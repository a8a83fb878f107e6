//! Experiment runner: binds the verification suites to JSON configs and
//! writes one machine-readable report per suite.
//!
//! Exit statuses: 0 when every check passes, 1 on a failed check, 2 on a
//! configuration error, 3 when an enumeration exceeds its budget.

pub mod config;
pub mod suites;

use config::{label_of, Format, RunConfig};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use suites::{run_suite, SuiteReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } => EXIT_CONFIG,
            Self::Budget(_) => EXIT_BUDGET,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Serialize)]
pub struct SuiteSummary {
    pub label: String,
    pub suite: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub pass: bool,
    pub exit_code: i32,
    pub suites: Vec<SuiteSummary>,
}

/// Runs every suite (concurrently, on `parallelism` workers) and writes the
/// reports in config order, followed by `summary.json`.
pub fn run(config: &RunConfig) -> Result<RunSummary, CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.parallelism {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?
    };
    let results: Vec<(String, Result<SuiteReport, CliError>)> = pool.install(|| {
        config
            .suites
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let label = label_of(i, s);
                let start = Instant::now();
                let mut r = run_suite(s, label.clone());
                if let Ok(rep) = r.as_mut() {
                    rep.runtime_s = config.record_timing.then(|| start.elapsed().as_secs_f64());
                }
                (label, r)
            })
            .collect()
    });
    let dir = &config.output.path;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut summaries = Vec::new();
    let mut exit_code = EXIT_PASS;
    for (i, (label, r)) in results.into_iter().enumerate() {
        let suite = config.suites[i].kind().as_str().to_string();
        match r {
            Ok(rep) => {
                let file = write_report(dir, config.output.format, &rep)?;
                if !rep.pass && exit_code == EXIT_PASS {
                    exit_code = EXIT_FAIL;
                }
                summaries.push(SuiteSummary { label, suite, pass: rep.pass, file: Some(file), error: None });
            }
            Err(e) => {
                exit_code = exit_code.max(e.exit_code());
                summaries.push(SuiteSummary { label, suite, pass: false, file: None, error: Some(e.to_string()) });
            }
        }
    }
    let summary = RunSummary { pass: exit_code == EXIT_PASS, exit_code, suites: summaries };
    let path = dir.join("summary.json");
    std::fs::write(&path, to_json(&summary)).map_err(io_err(&path))?;
    Ok(summary)
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn write_report(dir: &Path, format: Format, rep: &SuiteReport) -> Result<String, CliError> {
    let (name, body) = match format {
        Format::Json => (format!("{}.json", rep.label), to_json(rep)),
        Format::Csv => (format!("{}.csv", rep.label), checks_csv(rep)?),
    };
    let path = dir.join(&name);
    std::fs::write(&path, body).map_err(io_err(&path))?;
    Ok(name)
}

/// The flat check table of a report.
pub fn checks_csv(rep: &SuiteReport) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(["item", "metric", "value", "relation", "limit", "pass", "note"]).map_err(fail)?;
    for c in &rep.checks {
        let rel = serde_json::to_value(c.relation).expect("serializes");
        w.write_record([
            c.item.clone(),
            c.metric.clone(),
            c.value.map(|v| format!("{v:e}")).unwrap_or_default(),
            rel.as_str().unwrap_or_default().to_string(),
            format!("{:e}", c.limit),
            c.pass.to_string(),
            c.note.clone().unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads and runs a config file; returns the exit status.
pub fn run_file(path: &Path) -> Result<RunSummary, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    run(&RunConfig::parse(&text)?)
}

/// Exit status of a single report.
pub fn report_status(rep: &SuiteReport) -> i32 {
    if rep.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
