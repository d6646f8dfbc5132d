//! The descent-check command: run the normal-map method with exact
//! per-iteration error recording, partition the horizon into time windows,
//! and audit the merit descent inequality window by window.
//!
//! The command refuses to run without `diagnostic_mode = true`: the audit
//! compares against exact gradient errors, and silently auditing nothing
//! would be worse than an error. It also refuses — with guidance — when
//! the problem is too large for per-iteration exact gradients. Violations
//! do not change the exit code; this is a measurement instrument, and the
//! report is the result.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use normap::{
    descent_audit, kl_time_window, run_solver, time_indices, universal_time_window,
    window_errors, xi_from_lipschitz, Error, Method, RunConfig, StepSchedule,
};

use crate::config::{ExperimentConfig, ScheduleKind};
use crate::output::{fmt_f64, write_json, write_trajectory_csv, DescentReport};
use crate::{io_runtime, setup, CliError};

pub fn cmd_descent_check(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<DescentReport, CliError> {
    if !cfg.diagnostic_mode {
        return Err(CliError::Config(
            "descent-check audits exact gradient errors and needs them recorded; \
             set diagnostic_mode = true"
                .into(),
        ));
    }
    cfg.check_inputs()?;
    let built = setup::build_problem(cfg)?;
    let problem = &built.problem;
    let n_terms = problem.num_terms();
    let lipschitz = built.lipschitz.ok_or_else(|| {
        CliError::Config(
            "this problem carries no Lipschitz estimate, so no time window can be \
             computed; descent-check supports losses with one"
                .into(),
        )
    })?;

    let lambda = cfg.lambda.or(cfg.alpha).ok_or_else(|| {
        CliError::Config("set `lambda` (or `alpha`, which lambda = auto falls back to)".into())
    })?;
    let t_universal =
        universal_time_window(lipschitz, lambda).map_err(|e| CliError::Config(e.to_string()))?;
    let t = t_universal * cfg.t_scale;
    let t_kl = match cfg.kl_c_hat {
        Some(c_hat) => Some(
            kl_time_window(lipschitz, lambda, c_hat)
                .map_err(|e| CliError::Config(e.to_string()))?,
        ),
        None => None,
    };

    // `alpha = auto` with a constant schedule picks the largest step that
    // keeps every window inside the descent regime: just under T/5.
    let schedule = match cfg.schedule {
        ScheduleKind::Constant => {
            let alpha = cfg.alpha.unwrap_or(0.999 * t / 5.0);
            StepSchedule::constant(alpha).map_err(|e| CliError::Config(e.to_string()))?
        }
        ScheduleKind::Polynomial => {
            let alpha = cfg.alpha.ok_or_else(|| {
                CliError::Config("polynomial schedule needs `alpha` set explicitly".into())
            })?;
            super::solve::resolve_schedule(cfg, alpha, built.lipschitz)?
        }
    };
    let alpha0 = schedule.at(0);

    let budget = super::solve::resolve_budget(cfg)?;
    let mut rc = RunConfig::new(lambda, schedule.clone());
    rc.batch_size = cfg.batch_size.min(n_terms);
    rc.budget = budget;
    rc.seed = cfg.seeds[0];
    rc.lipschitz = Some(lipschitz);
    rc.diagnostic_mode = true;
    rc.record_every = super::solve::resolve_record_every(cfg, rc.total_iters(n_terms));
    rc.validate(problem).map_err(|e| match e {
        Error::SizeGuard(msg) => CliError::Config(format!(
            "refusing to run: {msg}; shrink the problem or batch the audit differently"
        )),
        other => CliError::Config(other.to_string()),
    })?;
    let n_iters = rc.total_iters(n_terms);

    let record = run_solver(problem, &rc, Method::NormSgd)
        .map_err(|e| CliError::Runtime(format!("instrumented run failed: {e}")))?;
    eprintln!("[descent-check] instrumented run: {:.2}s", record.elapsed_secs);
    let trace = record.diagnostics.as_ref().expect("diagnostic_mode records a trace");

    let partition = time_indices(&schedule, t, n_iters as usize)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let werr = window_errors(&trace.errors, &schedule, &partition)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let xi = xi_from_lipschitz(lipschitz, lambda)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    // Merit values at window boundaries, assembled from the per-iteration
    // trace: H = ψ(prox(z)) + (ξλ/2)‖F_nor(z)‖², and the trace's ψ entries
    // are already evaluated at prox(z).
    let merits: Vec<f64> = partition
        .indices
        .iter()
        .map(|&m| trace.psi[m] + 0.5 * xi * lambda * trace.fnor[m] * trace.fnor[m])
        .collect();
    let fnor_norms: Vec<f64> = partition.indices.iter().map(|&m| trace.fnor[m]).collect();

    let burn_in = match cfg.burn_in {
        Some(b) => b as usize,
        None => partition.k_delta.unwrap_or_else(|| partition.num_windows()),
    };
    let audit = descent_audit(&merits, &fnor_norms, &werr, xi, t, burn_in)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    fs::create_dir_all(out_dir)
        .map_err(|e| io_runtime(&format!("cannot create {}", out_dir.display()), e))?;
    write_trajectory_csv(&out_dir.join("descent_trajectory.csv"), &record)
        .map_err(|e| io_runtime("cannot write descent_trajectory.csv", e))?;
    write_windows_csv(&out_dir.join("windows.csv"), &partition, &werr.s, &merits, &fnor_norms, &audit.margins, burn_in)
        .map_err(|e| io_runtime("cannot write windows.csv", e))?;

    let report = DescentReport {
        lambda,
        xi,
        t_window: t,
        t_universal,
        t_kl,
        alpha0,
        iterations: n_iters,
        num_windows: partition.num_windows(),
        k_delta: partition.k_delta,
        truncated: partition.truncated,
        burn_in,
        windows_checked: audit.checked,
        violations: audit.violations.clone(),
        min_margin: audit.min_margin,
        mean_margin: audit.mean_margin,
        passed: audit.passed(),
    };
    write_json(&out_dir.join("descent_report.json"), &report)
        .map_err(|e| io_runtime("cannot write descent_report.json", e))?;
    eprintln!(
        "[descent-check] {} windows, {} audited, {} violation(s)",
        report.num_windows,
        report.windows_checked,
        report.violations.len()
    );
    Ok(report)
}

fn write_windows_csv(
    path: &Path,
    partition: &normap::WindowPartition,
    s: &[f64],
    merits: &[f64],
    fnor_norms: &[f64],
    margins: &[f64],
    burn_in: usize,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "window,m_start,m_end,tau,s,merit_start,merit_end,fnor_start,margin")?;
    for k in 0..partition.num_windows() {
        let margin = k
            .checked_sub(burn_in)
            .and_then(|i| margins.get(i))
            .map(|&m| fmt_f64(m))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            k,
            partition.indices[k],
            partition.indices[k + 1],
            fmt_f64(partition.taus[k]),
            fmt_f64(s[k]),
            fmt_f64(merits[k]),
            fmt_f64(merits[k + 1]),
            fmt_f64(fnor_norms[k]),
            margin,
        )?;
    }
    out.flush()
}
