//! Machine-readable run reports: a CSV table of per-replication results, a
//! JSON summary with aggregates and diagnostics, and the plot-data dumps
//! derived from them.
//!
//! The CSV column set is frozen:
//! `replication,pf_lower,pf_upper,cov_lower,cov_upper,n1,n2_lower,n2_upper,converged,seconds`.
//! Bodies are byte-deterministic for a fixed configuration except for the
//! `seconds` column, which is wall-clock timing.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error("report aggregates do not match the rows: {0}")]
    Inconsistent(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

/// One replication of the analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub replication: usize,
    pub seed: u64,
    pub pf_lower: f64,
    pub pf_upper: f64,
    pub cov_lower: Option<f64>,
    pub cov_upper: Option<f64>,
    pub n1: u64,
    pub n2_lower: usize,
    pub n2_upper: usize,
    pub converged: bool,
    pub seconds: f64,
}

/// Sample mean / standard deviation / coefficient of variation of one
/// report column over replications.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    pub cov: f64,
}

impl ColumnStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        let cov = if mean != 0.0 { std / mean } else { f64::NAN };
        Self { mean, std, cov }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregates {
    pub pf_lower: ColumnStats,
    pub pf_upper: ColumnStats,
    pub n1: ColumnStats,
    pub n2_lower: ColumnStats,
    pub n2_upper: ColumnStats,
}

impl Aggregates {
    pub fn from_rows(rows: &[RunRow]) -> Self {
        let col = |f: fn(&RunRow) -> f64| -> ColumnStats {
            ColumnStats::from_values(&rows.iter().map(f).collect::<Vec<_>>())
        };
        Self {
            pf_lower: col(|r| r.pf_lower),
            pf_upper: col(|r| r.pf_upper),
            n1: col(|r| r.n1 as f64),
            n2_lower: col(|r| r.n2_lower as f64),
            n2_upper: col(|r| r.n2_upper as f64),
        }
    }
}

/// Experimental-design snapshot for plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdSnapshot {
    /// Row-major point coordinates.
    pub points: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    /// Leading rows that came from a warm start / initial design.
    pub initial_len: usize,
}

/// Interval box attached to one second-level design point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxRect {
    pub point: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

/// One optimizer proposal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EgoTraceRow {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub ei: f64,
    /// Conditional failure probability when the proposal was evaluated.
    pub pf: Option<f64>,
}

/// One adaptive-run iteration: estimate and confidence bracket at a design
/// size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketTraceRow {
    pub n: usize,
    pub pf: f64,
    pub pf_plus: f64,
    pub pf_minus: f64,
}

/// Running best estimate and cumulative true-model calls per conditional
/// evaluation of an optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgressRow {
    pub evaluation: usize,
    pub best_pf: f64,
    pub n1: u64,
}

/// Per-run diagnostics captured from the first replication.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub level1_ed: Option<EdSnapshot>,
    pub level2_lower_ed: Option<EdSnapshot>,
    pub level2_upper_ed: Option<EdSnapshot>,
    pub boxes_lower: Option<Vec<BoxRect>>,
    pub boxes_upper: Option<Vec<BoxRect>>,
    pub ego_lower: Option<Vec<EgoTraceRow>>,
    pub ego_upper: Option<Vec<EgoTraceRow>>,
    pub theta_lower: Option<Vec<f64>>,
    pub theta_upper: Option<Vec<f64>>,
    /// Per-iteration estimate brackets of the adaptive runs.
    pub level1_history: Option<Vec<BracketTraceRow>>,
    pub level2_lower_history: Option<Vec<BracketTraceRow>>,
    pub level2_upper_history: Option<Vec<BracketTraceRow>>,
    /// Bound evolution against the true-model budget.
    pub ego_lower_progress: Option<Vec<ProgressRow>>,
    pub ego_upper_progress: Option<Vec<ProgressRow>>,
    /// Oracle sweep: evaluated parameter points and their estimates.
    pub oracle_sweep: Option<Vec<(Vec<f64>, f64)>>,
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub tool_version: String,
    /// `run` or `oracle`.
    pub command: String,
    pub problem: String,
    pub pbox_mode: String,
    pub config_echo: String,
    pub rows: Vec<RunRow>,
    pub aggregates: Aggregates,
    pub diagnostics: Diagnostics,
}

impl RunReport {
    pub fn new(
        command: &str,
        problem: &str,
        pbox_mode: &str,
        config_echo: &str,
        rows: Vec<RunRow>,
        diagnostics: Diagnostics,
    ) -> Self {
        let aggregates = Aggregates::from_rows(&rows);
        Self {
            format_version: REPORT_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            problem: problem.to_string(),
            pbox_mode: pbox_mode.to_string(),
            config_echo: config_echo.to_string(),
            rows,
            aggregates,
            diagnostics,
        }
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// CSV body with the frozen column set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "replication,pf_lower,pf_upper,cov_lower,cov_upper,n1,n2_lower,n2_upper,converged,seconds\n",
        );
        for r in &self.rows {
            let cov = |c: Option<f64>| match c {
                Some(v) => format!("{v:.12e}"),
                None => "nan".to_string(),
            };
            writeln!(
                out,
                "{},{:.12e},{:.12e},{},{},{},{},{},{},{:.3}",
                r.replication,
                r.pf_lower,
                r.pf_upper,
                cov(r.cov_lower),
                cov(r.cov_upper),
                r.n1,
                r.n2_lower,
                r.n2_upper,
                r.converged,
                r.seconds
            )
            .expect("string write");
        }
        out
    }

    /// Writes `report.csv` and `report.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), ReportError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join("report.csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(io_err(&csv_path))?;
        let json_path = dir.join("report.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| ReportError::Malformed(e.to_string()))?;
        std::fs::write(&json_path, json).map_err(io_err(&json_path))?;
        Ok((csv_path, json_path))
    }

    /// Loads a JSON report and checks that the stored aggregates match the
    /// rows (reports are recomputable from their own data).
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let report: RunReport =
            serde_json::from_str(&text).map_err(|e| ReportError::Malformed(e.to_string()))?;
        if report.rows.is_empty() {
            return Err(ReportError::Malformed("report has no rows".into()));
        }
        let recomputed = Aggregates::from_rows(&report.rows);
        let close = |a: f64, b: f64| -> bool {
            (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300) || (a.is_nan() && b.is_nan())
        };
        let pairs = [
            ("pf_lower.mean", report.aggregates.pf_lower.mean, recomputed.pf_lower.mean),
            ("pf_lower.std", report.aggregates.pf_lower.std, recomputed.pf_lower.std),
            ("pf_upper.mean", report.aggregates.pf_upper.mean, recomputed.pf_upper.mean),
            ("pf_upper.std", report.aggregates.pf_upper.std, recomputed.pf_upper.std),
            ("n1.mean", report.aggregates.n1.mean, recomputed.n1.mean),
            ("n2_lower.mean", report.aggregates.n2_lower.mean, recomputed.n2_lower.mean),
            ("n2_upper.mean", report.aggregates.n2_upper.mean, recomputed.n2_upper.mean),
        ];
        for (name, stored, fresh) in pairs {
            if !close(stored, fresh) {
                return Err(ReportError::Inconsistent(format!(
                    "{name}: stored {stored}, recomputed {fresh}"
                )));
            }
        }
        Ok(report)
    }
}

fn write_file(dir: &Path, name: &str, body: String, written: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(io_err(&path))?;
    written.push(path);
    Ok(())
}

fn ed_csv(ed: &EdSnapshot) -> String {
    let dim = ed.points.first().map(|p| p.len()).unwrap_or(0);
    let mut out = String::from("index,stage");
    for k in 0..dim {
        write!(out, ",x{}", k + 1).expect("string write");
    }
    out.push_str(",response\n");
    for (i, (p, y)) in ed.points.iter().zip(&ed.responses).enumerate() {
        let stage = if i < ed.initial_len { "initial" } else { "added" };
        write!(out, "{i},{stage}").expect("string write");
        for v in p {
            write!(out, ",{v:.12e}").expect("string write");
        }
        writeln!(out, ",{y:.12e}").expect("string write");
    }
    out
}

fn boxes_csv(boxes: &[BoxRect]) -> String {
    let dim = boxes.first().map(|b| b.bounds.len()).unwrap_or(0);
    let mut out = String::from("index");
    for k in 0..dim {
        write!(out, ",lo{0},hi{0}", k + 1).expect("string write");
    }
    out.push('\n');
    for (i, b) in boxes.iter().enumerate() {
        write!(out, "{i}").expect("string write");
        for &(lo, hi) in &b.bounds {
            write!(out, ",{lo:.12e},{hi:.12e}").expect("string write");
        }
        out.push('\n');
    }
    out
}

fn ego_csv(trace: &[EgoTraceRow]) -> String {
    let dim = trace.first().map(|t| t.theta.len()).unwrap_or(0);
    let mut out = String::from("iteration");
    for k in 0..dim {
        write!(out, ",theta{}", k + 1).expect("string write");
    }
    out.push_str(",ei,pf\n");
    for t in trace {
        write!(out, "{}", t.iteration).expect("string write");
        for v in &t.theta {
            write!(out, ",{v:.12e}").expect("string write");
        }
        match t.pf {
            Some(pf) => writeln!(out, ",{:.12e},{pf:.12e}", t.ei),
            None => writeln!(out, ",{:.12e},nan", t.ei),
        }
        .expect("string write");
    }
    out
}

/// Dumps the plot-ready CSV files (design-point coordinates with enrichment
/// order, interval boxes, optimizer traces) next to the report.
pub fn write_plot_data(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    let d = &report.diagnostics;
    if let Some(ed) = &d.level1_ed {
        write_file(out_dir, "level1_ed.csv", ed_csv(ed), &mut written)?;
    }
    if let Some(ed) = &d.level2_lower_ed {
        write_file(out_dir, "level2_lower_ed.csv", ed_csv(ed), &mut written)?;
    }
    if let Some(ed) = &d.level2_upper_ed {
        write_file(out_dir, "level2_upper_ed.csv", ed_csv(ed), &mut written)?;
    }
    if let Some(boxes) = &d.boxes_lower {
        write_file(out_dir, "boxes_lower.csv", boxes_csv(boxes), &mut written)?;
    }
    if let Some(boxes) = &d.boxes_upper {
        write_file(out_dir, "boxes_upper.csv", boxes_csv(boxes), &mut written)?;
    }
    if let Some(trace) = &d.ego_lower {
        write_file(out_dir, "ego_lower.csv", ego_csv(trace), &mut written)?;
    }
    if let Some(trace) = &d.ego_upper {
        write_file(out_dir, "ego_upper.csv", ego_csv(trace), &mut written)?;
    }
    for (name, hist) in [
        ("level1_history.csv", &d.level1_history),
        ("level2_lower_history.csv", &d.level2_lower_history),
        ("level2_upper_history.csv", &d.level2_upper_history),
    ] {
        if let Some(rows) = hist {
            let mut out = String::from("n,pf,pf_plus,pf_minus\n");
            for r in rows {
                writeln!(out, "{},{:.12e},{:.12e},{:.12e}", r.n, r.pf, r.pf_plus, r.pf_minus)
                    .expect("string write");
            }
            write_file(out_dir, name, out, &mut written)?;
        }
    }
    for (name, prog) in [
        ("ego_lower_progress.csv", &d.ego_lower_progress),
        ("ego_upper_progress.csv", &d.ego_upper_progress),
    ] {
        if let Some(rows) = prog {
            let mut out = String::from("evaluation,best_pf,n1\n");
            for r in rows {
                writeln!(out, "{},{:.12e},{}", r.evaluation, r.best_pf, r.n1)
                    .expect("string write");
            }
            write_file(out_dir, name, out, &mut written)?;
        }
    }
    if let Some(sweep) = &d.oracle_sweep {
        let dim = sweep.first().map(|(t, _)| t.len()).unwrap_or(0);
        let mut out = String::from("index");
        for k in 0..dim {
            write!(out, ",theta{}", k + 1).expect("string write");
        }
        out.push_str(",pf\n");
        for (i, (theta, pf)) in sweep.iter().enumerate() {
            write!(out, "{i}").expect("string write");
            for v in theta {
                write!(out, ",{v:.12e}").expect("string write");
            }
            writeln!(out, ",{pf:.12e}").expect("string write");
        }
        write_file(out_dir, "oracle_sweep.csv", out, &mut written)?;
    }
    Ok(written)
}
