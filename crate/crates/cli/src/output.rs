//! Serialization of run artifacts: trajectory CSVs and summary JSON.
//!
//! Reproducibility is byte-level here: a (config, seed) pair determines
//! every character of every output file. Floats are therefore written
//! with 17 significant digits (shortest lossless width for f64) and no
//! wall-clock data goes into any artifact — timing is stderr-only.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use normap::{AuditReport, TrajectoryRecord, TrajectoryRow};
use serde::Serialize;

/// First line of every trajectory CSV; bump the suffix if columns change.
pub const TRAJECTORY_HEADER: &str = "# normap-trajectory v1";

/// 17 significant digits, scientific — round-trips f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_row(out: &mut impl Write, row: &TrajectoryRow) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        row.k,
        fmt_f64(row.epoch),
        fmt_f64(row.psi),
        fmt_f64(row.fnat),
        fmt_opt(row.fnor),
        fmt_opt(row.merit),
        fmt_f64(row.sparsity_pct),
    )
}

/// Writes one run's recorded rows as CSV.
pub fn write_trajectory_csv(path: &Path, record: &TrajectoryRecord) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    writeln!(out, "k,epoch,psi,fnat,fnor,merit,sparsity_pct")?;
    for row in &record.rows {
        write_row(&mut out, row)?;
    }
    out.flush()
}

/// Summary of a single (method, α, seed) run, embedded in the solve
/// command's JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub alpha: f64,
    pub seed: u64,
    pub final_psi: f64,
    pub best_psi: f64,
    pub final_fnat: f64,
    pub final_sparsity_pct: f64,
    pub grad_calls: u64,
    pub prox_calls: u64,
    /// Epoch of the first recorded row meeting the accuracy threshold;
    /// absent when the run never got there or no target was available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs_to_accuracy: Option<f64>,
    /// Trajectory file name, relative to the output directory.
    pub csv: String,
}

/// Per-(method, α) aggregate over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct MethodAggregate {
    pub method: String,
    pub alpha: f64,
    pub seeds: usize,
    /// How many of those seeds reached the accuracy threshold.
    pub seeds_reaching_accuracy: usize,
    /// Mean epochs-to-accuracy over the seeds that reached it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_epochs_to_accuracy: Option<f64>,
    pub mean_final_psi: f64,
}

/// Top-level report of the solve command.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    /// Reference objective value from the deterministic solver, when its
    /// refinement converged from at least one starting point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_star: Option<f64>,
    pub reference_converged: bool,
    /// ψ ≤ psi_star + accuracy_margin defines "reached accuracy".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_margin: Option<f64>,
    pub runs: Vec<RunSummary>,
    pub aggregates: Vec<MethodAggregate>,
}

/// One cell of the rates command's fit table.
#[derive(Debug, Clone, Serialize)]
pub struct RateCell {
    pub gamma: f64,
    pub theta: f64,
    /// Fitted log-log slope of the ψ-gap (mean over seeds), when the fit
    /// succeeded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_psi_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_iterate: Option<f64>,
    /// Predicted decay exponents (as positive numbers): k^{-phi} etc.
    pub predicted_phi: f64,
    pub predicted_phi_x: f64,
    /// empirical slope + predicted exponent; near 0 means the trajectory
    /// decays at the predicted rate, negative means faster than predicted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_iterate: Option<f64>,
    /// Present when the empirical fit could not be carried out.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

/// Report of the descent-check command.
#[derive(Debug, Clone, Serialize)]
pub struct DescentReport {
    pub lambda: f64,
    pub xi: f64,
    /// Window length actually used (after `t_scale`).
    pub t_window: f64,
    /// The unscaled universal window for reference.
    pub t_universal: f64,
    /// KL-tightened window, when `kl_c_hat` was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_kl: Option<f64>,
    pub alpha0: f64,
    pub iterations: u64,
    pub num_windows: usize,
    /// Index of the first δ-covered window, when the horizon reached it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_delta: Option<usize>,
    /// Uncertain trailing window dropped by the partition.
    pub truncated: bool,
    pub burn_in: usize,
    pub windows_checked: usize,
    pub violations: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_margin: Option<f64>,
    pub passed: bool,
}

impl DescentReport {
    pub fn from_audit(audit: &AuditReport) -> (usize, Vec<usize>, Option<f64>, Option<f64>, bool) {
        (
            audit.checked,
            audit.violations.clone(),
            audit.min_margin,
            audit.mean_margin,
            audit.passed(),
        )
    }
}

/// Pretty-prints a serializable report to `path` with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let text = serde_json::to_string_pretty(value).expect("report types always serialize");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()
}
