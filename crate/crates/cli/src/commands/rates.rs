//! The rates command: predicted decay exponents on a (γ, θ) grid, and
//! empirical log-log slope fits on the configured problem.
//!
//! Two artifacts come out. `rate_map.csv` tabulates the closed-form
//! exponent maps over the configured γ × θ grid — no runs involved.
//! `rate_fit.csv` holds one row per configured γ: the normal-map method
//! is run on the problem (all seeds), the per-iteration ψ-gap and
//! ‖x − x*‖ series are averaged across seeds, and log-log slopes are
//! fitted past a burn-in. A fitted slope near −Φ means the trajectory
//! decays at the predicted rate; more negative means faster. Cells whose
//! fit cannot be carried out are flagged, never silently dropped.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use normap::{
    fit_loglog_slope, gamma1_log_rate, norm_sgd_step, phi_rate, phi_x_rate, Batch,
    CompositeProblem, MinibatchSampler, RateQuantity, SolverState, StepSchedule,
};

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, RateCell};
use crate::{io_runtime, run_indexed, setup, CliError};

/// Relative floor applied to ψ-gaps and distances before taking logs, so
/// a trajectory that lands exactly on the reference still fits cleanly.
pub const SERIES_FLOOR_REL: f64 = 1e-16;

/// One recorded point of a seed-averaged trajectory.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPoint {
    pub k: f64,
    /// Mean ψ(x^k) − ψ* over seeds (unfloored; may be ≤ 0 at convergence).
    pub psi_gap: f64,
    /// Mean ‖x^k − x*‖ over seeds.
    pub dist: f64,
}

/// Runs the normal-map method once per seed and returns the pointwise
/// seed average of (ψ-gap, ‖x − x*‖) at the recording cadence. The loop
/// mirrors the solver driver's conventions — start z⁰ = 𝟙/d, minibatch
/// stream 1, noise stream 2 — so its trajectories match what the solve
/// command would produce for the same (config, seed).
#[allow(clippy::too_many_arguments)]
pub fn fit_series(
    problem: &CompositeProblem,
    lambda: f64,
    schedule: &StepSchedule,
    batch_size: usize,
    total_iters: u64,
    record_every: u64,
    seeds: &[u64],
    x_star: &[f64],
    psi_star: f64,
) -> Result<Vec<SeriesPoint>, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("fit needs at least one seed".into()));
    }
    if record_every == 0 {
        return Err(CliError::Config("record_every must be >= 1".into()));
    }
    let runtime = |e: normap::Error| CliError::Runtime(format!("fit run failed: {e}"));
    let d = problem.dim();
    if x_star.len() != d {
        return Err(CliError::Runtime(format!(
            "reference point has dimension {}, problem has {d}",
            x_star.len()
        )));
    }
    let n_terms = problem.num_terms();
    let full_batch = batch_size == n_terms;

    let mut sums: Vec<SeriesPoint> = Vec::new();
    for (si, &seed) in seeds.iter().enumerate() {
        let z0 = vec![1.0 / d as f64; d];
        let mut state =
            SolverState::init_normal_map(z0, lambda, &problem.regularizer, seed).map_err(runtime)?;
        let mut sampler = if full_batch {
            None
        } else {
            Some(MinibatchSampler::new(n_terms, batch_size, seed).map_err(runtime)?)
        };
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(2);
        let mut g = vec![0.0; d];

        let mut points = Vec::new();
        let record = |points: &mut Vec<SeriesPoint>, k: u64, state: &SolverState| {
            let x = state.x();
            let mut sq = 0.0;
            for i in 0..d {
                let diff = x[i] - x_star[i];
                sq += diff * diff;
            }
            points.push(SeriesPoint {
                k: k as f64,
                psi_gap: problem.psi(x) - psi_star,
                dist: sq.sqrt(),
            });
        };
        record(&mut points, 0, &state);
        for k in 0..total_iters {
            let alpha = schedule.at(k);
            let batch = match &mut sampler {
                None => Batch::Full,
                Some(s) => Batch::Indices(s.next_batch()),
            };
            problem
                .smooth
                .stochastic_grad_into(state.x(), batch, &mut noise_rng, &mut g)
                .map_err(runtime)?;
            norm_sgd_step(&mut state, &g, alpha, lambda, &problem.regularizer)
                .map_err(runtime)?;
            let done = k + 1;
            if done % record_every == 0 || done == total_iters {
                record(&mut points, done, &state);
            }
        }

        if si == 0 {
            sums = points;
        } else {
            if points.len() != sums.len() {
                return Err(CliError::Runtime(
                    "seeds recorded different numbers of points".into(),
                ));
            }
            for (acc, p) in sums.iter_mut().zip(&points) {
                acc.psi_gap += p.psi_gap;
                acc.dist += p.dist;
            }
        }
    }
    let m = seeds.len() as f64;
    for p in &mut sums {
        p.psi_gap /= m;
        p.dist /= m;
    }
    Ok(sums)
}

/// Closed-form predictions for one (γ, θ) cell: the ψ-gap exponent, the
/// iterate exponent, and a note. γ = 1 sits outside the power-law map and
/// reports the power part of its logarithmic rate instead.
fn predicted(gamma: f64, theta: f64) -> Result<(f64, f64, &'static str), String> {
    if gamma == 1.0 {
        if !(0.0..1.0).contains(&theta) {
            return Err(format!("theta = {theta} outside [0, 1)"));
        }
        // Power parts of k^{-1} log^{1+ε} and k^{-1/2} log^{1/2+ε}.
        let psi = -gamma1_log_rate(RateQuantity::PsiGap, 1.0)
            .map_err(|e| e.to_string())?
            .k_exponent;
        let x = -gamma1_log_rate(RateQuantity::IterateDist, 1.0)
            .map_err(|e| e.to_string())?
            .k_exponent;
        return Ok((psi, x, "gamma_1_log_factors_omitted"));
    }
    let phi = phi_rate(gamma, theta).map_err(|e| e.to_string())?;
    let phi_x = phi_x_rate(gamma, theta).map_err(|e| e.to_string())?;
    Ok((phi, phi_x, ""))
}

fn write_rate_map(path: &Path, gammas: &[f64], thetas: &[f64]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "gamma,theta,phi,phi_x,note")?;
    for &gamma in gammas {
        for &theta in thetas {
            match predicted(gamma, theta) {
                Ok((phi, phi_x, note)) => writeln!(
                    out,
                    "{},{},{},{},{note}",
                    fmt_f64(gamma),
                    fmt_f64(theta),
                    fmt_f64(phi),
                    fmt_f64(phi_x),
                )?,
                Err(_) => writeln!(
                    out,
                    "{},{},,,outside_domain",
                    fmt_f64(gamma),
                    fmt_f64(theta),
                )?,
            }
        }
    }
    out.flush()
}

fn write_rate_fit(path: &Path, cells: &[RateCell]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "gamma,theta,slope_psi_gap,slope_iterate,predicted_phi,predicted_phi_x,\
         deviation_psi,deviation_iterate,note"
    )?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(c.gamma),
            fmt_f64(c.theta),
            opt(c.slope_psi_gap),
            opt(c.slope_iterate),
            fmt_f64(c.predicted_phi),
            fmt_f64(c.predicted_phi_x),
            opt(c.deviation_psi),
            opt(c.deviation_iterate),
            c.fit_error.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    out.flush()
}

pub fn cmd_rates(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<RateCell>, CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| io_runtime(&format!("cannot create {}", out_dir.display()), e))?;
    let map_path = out_dir.join("rate_map.csv");
    write_rate_map(&map_path, &cfg.gammas, &cfg.thetas)
        .map_err(|e| io_runtime("cannot write rate_map.csv", e))?;

    if cfg.gammas.is_empty() {
        // Nothing to fit; leave a header-only fit table for uniformity.
        write_rate_fit(&out_dir.join("rate_fit.csv"), &[])
            .map_err(|e| io_runtime("cannot write rate_fit.csv", e))?;
        return Ok(Vec::new());
    }

    cfg.check_inputs()?;
    let built = setup::build_problem(cfg)?;
    let problem = &built.problem;
    let n_terms = problem.num_terms();
    let alphas = cfg.alphas()?;
    let alpha = alphas[0];
    if alphas.len() > 1 {
        eprintln!("[rates] multiple alphas configured; fitting with alpha = {alpha}");
    }
    let budget = super::solve::resolve_budget(cfg)?;
    let lambda = cfg.lambda.unwrap_or(alpha);
    let batch = cfg.batch_size.min(n_terms);

    let reference = setup::reference_for(cfg, &built)?;
    let theta_cell = cfg.theta.or(built.known_theta);

    // Budget bookkeeping matches the solver's: epochs sweep ⌈N/batch⌉.
    let total_iters = {
        let mut rc = normap::RunConfig::new(1.0, StepSchedule::constant(1.0).unwrap());
        rc.batch_size = batch;
        rc.budget = budget;
        rc.total_iters(n_terms)
    };
    let record_every = super::solve::resolve_record_every(cfg, total_iters);
    let burn_in = cfg.burn_in.unwrap_or(total_iters / 5) as usize;

    let cells: Vec<RateCell> = run_indexed(cfg.gammas.len(), threads, |gi| {
        let gamma = cfg.gammas[gi];
        fit_cell(
            cfg, problem, &built, &reference, gamma, theta_cell, alpha, lambda, batch,
            total_iters, record_every, burn_in,
        )
    });

    write_rate_fit(&out_dir.join("rate_fit.csv"), &cells)
        .map_err(|e| io_runtime("cannot write rate_fit.csv", e))?;
    Ok(cells)
}

#[allow(clippy::too_many_arguments)]
fn fit_cell(
    cfg: &ExperimentConfig,
    problem: &CompositeProblem,
    built: &normap::BuiltProblem,
    reference: &setup::Reference,
    gamma: f64,
    theta_cell: Option<f64>,
    alpha: f64,
    lambda: f64,
    batch: usize,
    total_iters: u64,
    record_every: u64,
    burn_in: usize,
) -> RateCell {
    let theta = theta_cell.unwrap_or(f64::NAN);
    let (predicted_phi, predicted_phi_x, pred_note) = match theta_cell {
        Some(t) => match predicted(gamma, t) {
            Ok(v) => v,
            Err(_) => (f64::NAN, f64::NAN, "prediction_outside_domain"),
        },
        None => (f64::NAN, f64::NAN, "theta_unknown_set_theta"),
    };
    let mut cell = RateCell {
        gamma,
        theta,
        slope_psi_gap: None,
        slope_iterate: None,
        predicted_phi,
        predicted_phi_x,
        deviation_psi: None,
        deviation_iterate: None,
        fit_error: if pred_note.is_empty() { None } else { Some(pred_note.to_string()) },
    };

    if !reference.converged {
        cell.fit_error = Some("reference_not_converged".into());
        return cell;
    }
    let beta = match cfg.beta.or(built.lipschitz) {
        Some(b) => b,
        None => {
            cell.fit_error = Some("no_beta_available".into());
            return cell;
        }
    };
    let schedule = match StepSchedule::polynomial(alpha, beta, gamma) {
        Ok(s) => s,
        Err(e) => {
            cell.fit_error = Some(format!("schedule: {e}").replace(' ', "_"));
            return cell;
        }
    };
    let series = match fit_series(
        problem,
        lambda,
        &schedule,
        batch,
        total_iters,
        record_every,
        &cfg.seeds,
        &reference.x_star,
        reference.psi_star,
    ) {
        Ok(s) => s,
        Err(e) => {
            cell.fit_error = Some(format!("{e}").replace(' ', "_"));
            return cell;
        }
    };

    let gap_floor = SERIES_FLOOR_REL * reference.psi_star.abs().max(1.0);
    let gap_pairs: Vec<(f64, f64)> =
        series.iter().map(|p| (p.k, p.psi_gap.max(gap_floor))).collect();
    let dist_pairs: Vec<(f64, f64)> =
        series.iter().map(|p| (p.k, p.dist.max(SERIES_FLOOR_REL))).collect();
    match fit_loglog_slope(&gap_pairs, burn_in) {
        Ok((slope, _r2)) => {
            cell.slope_psi_gap = Some(slope);
            if predicted_phi.is_finite() {
                cell.deviation_psi = Some(slope + predicted_phi);
            }
        }
        Err(e) => cell.fit_error = Some(format!("psi_fit: {e}").replace(' ', "_")),
    }
    match fit_loglog_slope(&dist_pairs, burn_in) {
        Ok((slope, _r2)) => {
            cell.slope_iterate = Some(slope);
            if predicted_phi_x.is_finite() {
                cell.deviation_iterate = Some(slope + predicted_phi_x);
            }
        }
        Err(e) => {
            let msg = format!("iterate_fit: {e}").replace(' ', "_");
            cell.fit_error = Some(match cell.fit_error.take() {
                Some(prev) => format!("{prev};{msg}"),
                None => msg,
            });
        }
    }
    cell
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_grid_handles_every_region() {
        // Interior of the power-law domain.
        let (phi, phi_x, note) = predicted(0.75, 0.0).unwrap();
        assert!((phi - 0.5).abs() < 1e-15);
        assert!((phi_x - 0.125).abs() < 1e-15);
        assert!(note.is_empty());
        // γ = 1 reports log-rate power parts.
        let (phi, phi_x, note) = predicted(1.0, 0.5).unwrap();
        assert_eq!(phi, 1.0);
        assert_eq!(phi_x, 0.5);
        assert!(!note.is_empty());
        // Outside the domain.
        assert!(predicted(0.6, 0.5).is_err());
        assert!(predicted(0.75, 1.0).is_err());
    }

    #[test]
    fn series_floor_keeps_logs_finite() {
        let floor: f64 = SERIES_FLOOR_REL;
        assert!(floor.ln().is_finite());
    }
}
