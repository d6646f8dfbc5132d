//! The solve command: sweep (method, α, seed) runs, write one trajectory
//! CSV per run, then a summary with epochs-to-accuracy against a
//! deterministic reference value ψ*.
//!
//! The reference is refined first, from three starting points; if no
//! refinement run converges, the summary reports every trajectory but
//! marks the accuracy target unavailable rather than measuring against a
//! value nobody trusts. Averaging across seeds happens only here, in the
//! summary layer — individual runs are never blended.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use normap::{run_solver, Budget, Method, RunConfig, StepSchedule, TrajectoryRecord};

use crate::config::{ExperimentConfig, MethodKind, ScheduleKind};
use crate::output::{write_json, write_trajectory_csv, MethodAggregate, RunSummary, SolveSummary};
use crate::{io_runtime, run_indexed, setup, CliError};

/// One fully resolved run of the sweep.
struct RunSpec {
    method: MethodKind,
    alpha: f64,
    seed: u64,
    name: String,
    core_method: Method,
    rc: RunConfig,
}

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}").replace('.', "p").replace('-', "m")
}

/// Resolves the budget shared by solver-running commands.
pub fn resolve_budget(cfg: &ExperimentConfig) -> Result<Budget, CliError> {
    match (cfg.epochs, cfg.max_iters) {
        (Some(e), None) => Ok(Budget::Epochs(e)),
        (None, Some(m)) => Ok(Budget::Iters(m)),
        (None, None) => Err(CliError::Config("set `epochs` or `max_iters`".into())),
        (Some(_), Some(_)) => unreachable!("config loading rejects this combination"),
    }
}

/// Row-recording cadence: explicit `record_every`, else about 200 rows.
pub fn resolve_record_every(cfg: &ExperimentConfig, total_iters: u64) -> u64 {
    cfg.record_every.unwrap_or_else(|| (total_iters / 200).max(1))
}

/// Builds the schedule for a stochastic run with step numerator `alpha`.
pub fn resolve_schedule(
    cfg: &ExperimentConfig,
    alpha: f64,
    lipschitz: Option<f64>,
) -> Result<StepSchedule, CliError> {
    match cfg.schedule {
        ScheduleKind::Constant => {
            StepSchedule::constant(alpha).map_err(|e| CliError::Config(e.to_string()))
        }
        ScheduleKind::Polynomial => {
            let beta = cfg.beta.or(lipschitz).ok_or_else(|| {
                CliError::Config(
                    "beta = auto needs a Lipschitz estimate, which this problem does not \
                     provide; set `beta` explicitly"
                        .into(),
                )
            })?;
            StepSchedule::polynomial(alpha, beta, cfg.gamma)
                .map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

pub fn cmd_solve(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<SolveSummary, CliError> {
    cfg.check_inputs()?;
    let built = setup::build_problem(cfg)?;
    let problem = &built.problem;
    let n_terms = problem.num_terms();
    let alphas = cfg.alphas()?;
    let budget = resolve_budget(cfg)?;

    // Resolve the reference target before burning time on the sweep.
    let reference = setup::reference_for(cfg, &built)?;
    let (psi_star, accuracy_margin) = if reference.converged {
        (Some(reference.psi_star), Some(0.01 * reference.psi_star.max(1.0)))
    } else {
        eprintln!(
            "[solve] reference solver did not converge within {} iterations; \
             accuracy target unavailable",
            cfg.max_ref_iters
        );
        (None, None)
    };
    let threshold = match (psi_star, accuracy_margin) {
        (Some(p), Some(m)) => Some(p + m),
        _ => None,
    };

    // Enumerate and validate every run up front so a bad combination is a
    // config error before any artifact is written.
    let mut specs: Vec<RunSpec> = Vec::new();
    let mut names = BTreeSet::new();
    for &alpha in &alphas {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                let lambda = cfg.lambda.unwrap_or(alpha);
                let (core_method, schedule, batch_size) = match method {
                    MethodKind::NormSgd => {
                        (Method::NormSgd, resolve_schedule(cfg, alpha, built.lipschitz)?, cfg.batch_size)
                    }
                    MethodKind::ProxSgd => {
                        (Method::ProxSgd, resolve_schedule(cfg, alpha, built.lipschitz)?, cfg.batch_size)
                    }
                    // The deterministic reference method is exact prox
                    // gradient: full batch, constant step λ.
                    MethodKind::DetProxGrad => (
                        Method::ProxSgd,
                        StepSchedule::constant(lambda)
                            .map_err(|e| CliError::Config(e.to_string()))?,
                        n_terms,
                    ),
                };
                let mut rc = RunConfig::new(lambda, schedule);
                rc.batch_size = batch_size;
                rc.budget = budget;
                rc.seed = seed;
                rc.lipschitz = built.lipschitz;
                rc.record_every = resolve_record_every(cfg, rc.total_iters(n_terms));
                rc.diagnostic_mode = cfg.diagnostic_mode;
                rc.validate(problem).map_err(|e| CliError::Config(e.to_string()))?;

                let name =
                    format!("{}_a{}_s{}.csv", method.as_str(), alpha_tag(alpha), seed);
                if !names.insert(name.clone()) {
                    return Err(CliError::Config(format!(
                        "two runs map to the same output file {name}; \
                         deduplicate `alpha_list`"
                    )));
                }
                specs.push(RunSpec { method, alpha, seed, name, core_method, rc });
            }
        }
    }

    fs::create_dir_all(out_dir)
        .map_err(|e| io_runtime(&format!("cannot create {}", out_dir.display()), e))?;

    let results: Vec<Result<RunSummary, CliError>> =
        run_indexed(specs.len(), threads, |i| run_one(&specs[i], problem, out_dir, threshold));
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }

    let aggregates = aggregate(cfg, &alphas, &runs);
    let summary = SolveSummary {
        psi_star,
        reference_converged: reference.converged,
        accuracy_margin,
        runs,
        aggregates,
    };
    write_json(&out_dir.join("summary.json"), &summary)
        .map_err(|e| io_runtime("cannot write summary.json", e))?;
    Ok(summary)
}

fn run_one(
    spec: &RunSpec,
    problem: &normap::CompositeProblem,
    out_dir: &Path,
    threshold: Option<f64>,
) -> Result<RunSummary, CliError> {
    let record = run_solver(problem, &spec.rc, spec.core_method)
        .map_err(|e| CliError::Runtime(format!("run {}: {e}", spec.name)))?;
    eprintln!("[solve] {}: {:.2}s", spec.name, record.elapsed_secs);
    let path = out_dir.join(&spec.name);
    write_trajectory_csv(&path, &record)
        .map_err(|e| io_runtime(&format!("cannot write {}", path.display()), e))?;
    Ok(summarize_run(spec, &record, threshold))
}

fn summarize_run(
    spec: &RunSpec,
    record: &TrajectoryRecord,
    threshold: Option<f64>,
) -> RunSummary {
    let last = record.rows.last().expect("a run always records its initial row");
    let best_psi = record.rows.iter().map(|r| r.psi).fold(f64::INFINITY, f64::min);
    let epochs_to_accuracy = threshold
        .and_then(|t| record.rows.iter().find(|r| r.psi <= t).map(|r| r.epoch));
    RunSummary {
        method: spec.method.as_str().to_string(),
        alpha: spec.alpha,
        seed: spec.seed,
        final_psi: last.psi,
        best_psi,
        final_fnat: last.fnat,
        final_sparsity_pct: last.sparsity_pct,
        grad_calls: record.grad_calls,
        prox_calls: record.prox_calls,
        epochs_to_accuracy,
        csv: spec.name.clone(),
    }
}

fn aggregate(cfg: &ExperimentConfig, alphas: &[f64], runs: &[RunSummary]) -> Vec<MethodAggregate> {
    let mut out = Vec::new();
    for &alpha in alphas {
        for &method in &cfg.methods {
            let group: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.alpha == alpha && r.method == method.as_str())
                .collect();
            if group.is_empty() {
                continue;
            }
            let reaching: Vec<f64> =
                group.iter().filter_map(|r| r.epochs_to_accuracy).collect();
            let mean_epochs = if reaching.is_empty() {
                None
            } else {
                Some(reaching.iter().sum::<f64>() / reaching.len() as f64)
            };
            let mean_final_psi =
                group.iter().map(|r| r.final_psi).sum::<f64>() / group.len() as f64;
            out.push(MethodAggregate {
                method: method.as_str().to_string(),
                alpha,
                seeds: group.len(),
                seeds_reaching_accuracy: reaching.len(),
                mean_epochs_to_accuracy: mean_epochs,
                mean_final_psi,
            });
        }
    }
    out
}
