//! norM-SGD and prox-SGD steps, the shared run driver, and the
//! deterministic proximal-gradient reference solver.
//!
//! The normal-map method keeps a pair (z, x) with x = prox_{λφ}(z) and a
//! *fixed* prox scaling λ:
//!
//! > z⁺ = z − α (g + (z − x)/λ),   x⁺ = prox_{λφ}(z⁺),
//!
//! while prox-SGD keeps only x and rescales the prox with the step size:
//!
//! > x⁺ = prox_{αφ}(x − α g).
//!
//! Per iteration each method consumes exactly one stochastic gradient and
//! one prox evaluation, so equal iteration budgets imply equal oracle
//! budgets; [`run_solver`] counts both so the parity is checkable rather
//! than assumed.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::composite::{natural_residual, Batch, CompositeProblem};
use crate::diagnostics::{sparsity, xi_from_lipschitz};
use crate::error::{Error, Result};
use crate::problems::MinibatchSampler;
use crate::prox::ProxOracle;
use crate::vecmath::{all_finite, norm2};

/// Step-size schedule k ↦ α_k.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    /// α_k ≡ α. Mostly useful for diagnostics (fixed time windows).
    Constant { alpha: f64 },
    /// α_k = α / (β + k)^γ with γ ∈ (½, 1]; strictly decreasing.
    Polynomial { alpha: f64, beta: f64, gamma: f64 },
}

impl StepSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("step size alpha = {alpha} must be > 0")));
        }
        Ok(StepSchedule::Constant { alpha })
    }

    pub fn polynomial(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial schedule needs alpha, beta > 0 (got {alpha}, {beta})"
            )));
        }
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial schedule exponent gamma = {gamma} must lie in (1/2, 1]"
            )));
        }
        Ok(StepSchedule::Polynomial { alpha, beta, gamma })
    }

    /// α_k.
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::Polynomial { alpha, beta, gamma } => alpha / (beta + k as f64).powf(gamma),
        }
    }
}

/// Which stochastic method a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NormSgd,
    ProxSgd,
}

/// The live iterates of a run: the (z, x) pair for the normal-map method or
/// the single x for prox-SGD.
#[derive(Debug, Clone, PartialEq)]
pub enum Iterates {
    NormalMap { z: Vec<f64>, x: Vec<f64> },
    ProxSgd { x: Vec<f64> },
}

/// Solver state: iterates, step counter, and the seed that reproduces the
/// run the state belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub iterates: Iterates,
    /// Increments by exactly one per step.
    pub k: u64,
    pub seed: u64,
}

impl SolverState {
    /// Initializes the normal-map pair from z⁰: x⁰ := prox_{λφ}(z⁰).
    ///
    /// When φ ≠ 0 this x⁰ may differ from the raw start vector the caller
    /// had in mind — the method requires the prox relation from the start.
    pub fn init_normal_map(z0: Vec<f64>, lambda: f64, prox: &ProxOracle, seed: u64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
        }
        if z0.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !all_finite(&z0) {
            return Err(Error::NonFinite { k: 0 });
        }
        let x0 = prox.apply(&z0, lambda);
        Ok(SolverState { iterates: Iterates::NormalMap { z: z0, x: x0 }, k: 0, seed })
    }

    pub fn init_prox_sgd(x0: Vec<f64>, seed: u64) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !all_finite(&x0) {
            return Err(Error::NonFinite { k: 0 });
        }
        Ok(SolverState { iterates: Iterates::ProxSgd { x: x0 }, k: 0, seed })
    }

    /// The current primal iterate x^k (for either method).
    pub fn x(&self) -> &[f64] {
        match &self.iterates {
            Iterates::NormalMap { x, .. } => x,
            Iterates::ProxSgd { x } => x,
        }
    }

    /// The current z^k, if the state belongs to the normal-map method.
    pub fn z(&self) -> Option<&[f64]> {
        match &self.iterates {
            Iterates::NormalMap { z, .. } => Some(z),
            Iterates::ProxSgd { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.x().len()
    }
}

/// One norM-SGD step: z ← z − α(g + (z − x)/λ), then x ← prox_{λφ}(z).
///
/// `g` must be a gradient estimate taken at the state's current x. The
/// state must be in the normal-map variant. Exactly one prox evaluation.
pub fn norm_sgd_step(
    state: &mut SolverState,
    g: &[f64],
    alpha: f64,
    lambda: f64,
    prox: &ProxOracle,
) -> Result<()> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("step size alpha = {alpha} must be >= 0")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    let k = state.k as usize;
    let Iterates::NormalMap { z, x } = &mut state.iterates else {
        return Err(Error::Precondition("norm_sgd_step requires a normal-map state".into()));
    };
    if g.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: g.len() });
    }
    if !all_finite(g) {
        return Err(Error::NonFinite { k });
    }
    for ((zi, &gi), &xi) in z.iter_mut().zip(g).zip(x.iter()) {
        *zi -= alpha * (gi + (*zi - xi) / lambda);
    }
    if !all_finite(z) {
        return Err(Error::NonFinite { k: k + 1 });
    }
    prox.apply_into(z, lambda, x);
    state.k += 1;
    Ok(())
}

/// One prox-SGD step: prox_{αφ}(x − αg). A zero step returns x unchanged.
pub fn prox_sgd_step(x: &[f64], g: &[f64], alpha: f64, prox: &ProxOracle) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("step size alpha = {alpha} must be >= 0")));
    }
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: g.len() });
    }
    if !all_finite(g) {
        return Err(Error::NonFinite { k: 0 });
    }
    if alpha == 0.0 {
        return Ok(x.to_vec());
    }
    let step: Vec<f64> = x.iter().zip(g).map(|(&xi, &gi)| xi - alpha * gi).collect();
    if !all_finite(&step) {
        return Err(Error::NonFinite { k: 0 });
    }
    Ok(prox.apply(&step, alpha))
}

/// Iteration budget, either directly or in epochs (one epoch is
/// ⌈N/batch_size⌉ iterations of a finite-sum problem).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Iters(u64),
    Epochs(u64),
}

/// Everything a reproducible run needs besides the problem itself.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Prox scaling λ of the normal-map method; also the λ at which the
    /// recorded ‖F_nat‖ diagnostic is evaluated for both methods.
    pub lambda: f64,
    pub schedule: StepSchedule,
    /// Minibatch size. Must satisfy 1 ≤ batch_size ≤ N; choosing
    /// batch_size = N switches the run to exact full gradients.
    pub batch_size: usize,
    pub budget: Budget,
    /// Master seed: stream 1 of a counter-based generator drives minibatch
    /// shuffling, stream 2 drives any oracle-internal noise.
    pub seed: u64,
    /// Diagnostics are recorded at k = 0, every `record_every` iterations,
    /// and at the final iterate.
    pub record_every: u64,
    /// When set, additionally compute the exact gradient each iteration and
    /// store the per-iteration noise e^k = g^k − ∇f(x^k) along with per-
    /// iterate ψ and ‖F_nor‖ — the raw material of the descent audit.
    pub diagnostic_mode: bool,
    /// Start vector z⁰ (= x⁰ for prox-SGD). `None` means the uniform vector
    /// 𝟙/d. For the normal-map method the effective x⁰ is prox_{λφ}(z⁰).
    pub x0: Option<Vec<f64>>,
    /// Known/estimated Lipschitz constant of ∇f; enables the merit-value
    /// column (via ξ = 1/(2+2λ²L²)) when present.
    pub lipschitz: Option<f64>,
    /// diagnostic_mode is refused when d·N exceeds this bound.
    pub size_guard: u64,
}

impl RunConfig {
    pub fn new(lambda: f64, schedule: StepSchedule) -> Self {
        RunConfig {
            lambda,
            schedule,
            batch_size: 1,
            budget: Budget::Iters(1000),
            seed: 0,
            record_every: 1,
            diagnostic_mode: false,
            x0: None,
            lipschitz: None,
            size_guard: 10_000_000,
        }
    }

    /// Iterations in one epoch: ⌈N/batch_size⌉.
    pub fn iters_per_epoch(&self, n_terms: usize) -> u64 {
        (n_terms as u64).div_ceil(self.batch_size as u64)
    }

    pub fn total_iters(&self, n_terms: usize) -> u64 {
        match self.budget {
            Budget::Iters(n) => n,
            Budget::Epochs(e) => e * self.iters_per_epoch(n_terms),
        }
    }

    pub fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        let d = problem.dim();
        let n = problem.num_terms();
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be > 0", self.lambda)));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidParameter(format!(
                "batch_size = {} must lie in [1, {n}]",
                self.batch_size
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
            }
            if !all_finite(x0) {
                return Err(Error::NonFinite { k: 0 });
            }
        }
        if let Some(l) = self.lipschitz {
            if !(l >= 0.0) {
                return Err(Error::InvalidParameter(format!("lipschitz = {l} must be >= 0")));
            }
        }
        if self.diagnostic_mode {
            let cells = d as u64 * n as u64;
            if cells > self.size_guard {
                return Err(Error::SizeGuard(format!(
                    "diagnostic_mode needs full gradients every iteration; d*N = {cells} exceeds \
                     the guard {} (raise size_guard deliberately to override)",
                    self.size_guard
                )));
            }
        }
        Ok(())
    }
}

/// One recorded diagnostics row. All values are deterministic functions of
/// (config, seed); wall-clock time is deliberately kept out so recorded
/// trajectories can be compared bit-for-bit across reruns.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub k: u64,
    /// Epochs of data consumed: k / ⌈N/batch_size⌉.
    pub epoch: f64,
    pub psi: f64,
    /// ‖F_nat(x^k)‖ evaluated at the run's λ.
    pub fnat: f64,
    /// ‖F_nor(z^k)‖; `None` for prox-SGD, which has no z iterate.
    pub fnor: Option<f64>,
    /// Merit value H_ξ(z^k); needs both a z iterate and a Lipschitz estimate.
    pub merit: Option<f64>,
    /// Percentage of entries with |x_i| ≤ 1e−8.
    pub sparsity_pct: f64,
}

/// Per-iteration raw material for the descent audit, collected only in
/// diagnostic mode. `psi` and `fnor` hold n+1 entries (every iterate
/// including the last); `alphas` and `errors` hold n entries (one per step).
/// `fnor` stays empty for prox-SGD runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticTrace {
    pub alphas: Vec<f64>,
    pub psi: Vec<f64>,
    pub fnor: Vec<f64>,
    pub errors: Vec<Vec<f64>>,
}

/// The full output of one run.
#[derive(Debug)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub final_state: SolverState,
    /// Stochastic-gradient oracle calls made by the method itself. Recording
    /// diagnostics costs extra full-gradient evaluations that are *not*
    /// counted here, so the counters reflect algorithmic cost only.
    pub grad_calls: u64,
    /// Prox oracle calls made by the method itself (the initialization prox
    /// of the normal-map method is excluded for the same reason).
    pub prox_calls: u64,
    /// Whole-run wall time. Not part of any per-row data.
    pub elapsed_secs: f64,
    pub diagnostics: Option<DiagnosticTrace>,
}

fn record_row(
    problem: &CompositeProblem,
    state: &SolverState,
    lambda: f64,
    xi: Option<f64>,
    iters_per_epoch: u64,
) -> Result<TrajectoryRow> {
    let x = state.x();
    let psi = problem.psi(x);
    let fnat = norm2(&natural_residual(problem, x, lambda)?);
    let (fnor, merit) = match &state.iterates {
        Iterates::NormalMap { z, x } => {
            let mut gf = problem.smooth_grad(x);
            for (gi, (&zi, &xi)) in gf.iter_mut().zip(z.iter().zip(x.iter())) {
                *gi += (zi - xi) / lambda;
            }
            let n = norm2(&gf);
            (Some(n), xi_merit(psi, n, lambda, xi))
        }
        Iterates::ProxSgd { .. } => (None, None),
    };
    if !psi.is_finite() || !fnat.is_finite() {
        return Err(Error::NonFinite { k: state.k as usize });
    }
    Ok(TrajectoryRow {
        k: state.k,
        epoch: state.k as f64 / iters_per_epoch as f64,
        psi,
        fnat,
        fnor,
        merit,
        sparsity_pct: sparsity(x, 1e-8)?,
    })
}

fn xi_merit(psi: f64, fnor_norm: f64, lambda: f64, xi: Option<f64>) -> Option<f64> {
    xi.map(|xi| psi + 0.5 * xi * lambda * fnor_norm * fnor_norm)
}

/// Runs one method to its budget, recording diagnostics along the way.
///
/// The output is a deterministic function of (problem, cfg, method): the
/// run uses a counter-based RNG seeded from `cfg.seed` with fixed stream
/// assignments, so re-running with identical inputs reproduces every row
/// and the final state exactly.
pub fn run_solver(
    problem: &CompositeProblem,
    cfg: &RunConfig,
    method: Method,
) -> Result<TrajectoryRecord> {
    cfg.validate(problem)?;
    let start = Instant::now();
    let d = problem.dim();
    let n_terms = problem.num_terms();
    let lambda = cfg.lambda;
    let n_iters = cfg.total_iters(n_terms);
    let iters_per_epoch = cfg.iters_per_epoch(n_terms);
    let full_batch = cfg.batch_size == n_terms;

    let z0 = cfg.x0.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]);
    let mut state = match method {
        Method::NormSgd => SolverState::init_normal_map(z0, lambda, &problem.regularizer, cfg.seed)?,
        Method::ProxSgd => SolverState::init_prox_sgd(z0, cfg.seed)?,
    };

    let xi = match cfg.lipschitz {
        Some(l) => Some(xi_from_lipschitz(l, lambda)?),
        None => None,
    };

    let mut sampler =
        if full_batch { None } else { Some(MinibatchSampler::new(n_terms, cfg.batch_size, cfg.seed)?) };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(2);

    let mut rows = vec![record_row(problem, &state, lambda, xi, iters_per_epoch)?];
    let mut diag = cfg.diagnostic_mode.then(DiagnosticTrace::default);

    let mut g = vec![0.0; d];
    let mut g_full = vec![0.0; d];
    let mut grad_calls = 0u64;
    let mut prox_calls = 0u64;

    for k in 0..n_iters {
        let alpha = cfg.schedule.at(k);
        let batch = match &mut sampler {
            None => Batch::Full,
            Some(s) => Batch::Indices(s.next_batch()),
        };
        problem.smooth.stochastic_grad_into(state.x(), batch, &mut noise_rng, &mut g)?;
        grad_calls += 1;

        if let Some(tr) = &mut diag {
            problem.smooth.grad_into(state.x(), &mut g_full);
            tr.alphas.push(alpha);
            tr.psi.push(problem.psi(state.x()));
            if let Iterates::NormalMap { z, x } = &state.iterates {
                let mut sq = 0.0;
                for i in 0..d {
                    let v = g_full[i] + (z[i] - x[i]) / lambda;
                    sq += v * v;
                }
                tr.fnor.push(sq.sqrt());
            }
            tr.errors.push(g.iter().zip(&g_full).map(|(gi, fi)| gi - fi).collect());
        }

        match method {
            Method::NormSgd => {
                norm_sgd_step(&mut state, &g, alpha, lambda, &problem.regularizer)?;
            }
            Method::ProxSgd => {
                let Iterates::ProxSgd { x } = &mut state.iterates else { unreachable!() };
                let next = prox_sgd_step(x, &g, alpha, &problem.regularizer).map_err(|e| match e {
                    Error::NonFinite { .. } => Error::NonFinite { k: k as usize },
                    other => other,
                })?;
                *x = next;
                state.k += 1;
            }
        }
        prox_calls += 1;

        if !all_finite(state.x()) {
            return Err(Error::NonFinite { k: k as usize + 1 });
        }
        let done = k + 1;
        if done % cfg.record_every == 0 || done == n_iters {
            rows.push(record_row(problem, &state, lambda, xi, iters_per_epoch)?);
        }
    }

    if let Some(tr) = &mut diag {
        problem.smooth.grad_into(state.x(), &mut g_full);
        tr.psi.push(problem.psi(state.x()));
        if let Iterates::NormalMap { z, x } = &state.iterates {
            let mut sq = 0.0;
            for i in 0..d {
                let v = g_full[i] + (z[i] - x[i]) / lambda;
                sq += v * v;
            }
            tr.fnor.push(sq.sqrt());
        }
    }

    Ok(TrajectoryRecord {
        rows,
        final_state: state,
        grad_calls,
        prox_calls,
        elapsed_secs: start.elapsed().as_secs_f64(),
        diagnostics: diag,
    })
}

/// Result of the deterministic reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxGradResult {
    /// The converged iterate, or the lowest-ψ iterate seen if the budget
    /// ran out first.
    pub x: Vec<f64>,
    pub psi: f64,
    pub converged: bool,
    /// Number of proximal-gradient steps actually taken.
    pub iters: u64,
}

/// Full-gradient proximal descent x⁺ = prox_{step·φ}(x − step·∇f(x)),
/// stopped when ‖F_nat(x)‖ at scaling `lambda` drops below `tol`.
///
/// This is the reference solver that supplies stationary points x* and
/// target values ψ* for accuracy criteria; `lambda = 1` reproduces the
/// conventional residual ‖F¹_nat‖. A sensible default step is 1/L.
pub fn deterministic_prox_grad(
    problem: &CompositeProblem,
    x0: &[f64],
    lambda: f64,
    step: f64,
    tol: f64,
    max_iter: u64,
) -> Result<ProxGradResult> {
    if !(lambda > 0.0) || !(step > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda}, step = {step}, tol = {tol} must all be > 0"
        )));
    }
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x0.len() });
    }
    let mut x = x0.to_vec();
    let mut best_x = x.clone();
    let mut best_psi = problem.psi(&x);
    let mut g = vec![0.0; x.len()];
    let mut shifted = vec![0.0; x.len()];
    for it in 0..=max_iter {
        problem.smooth.grad_into(&x, &mut g);
        // ‖F_nat‖ and the descent step share this gradient evaluation.
        for i in 0..x.len() {
            shifted[i] = x[i] - lambda * g[i];
        }
        let prox_pt = problem.regularizer.apply(&shifted, lambda);
        let res: f64 =
            x.iter().zip(&prox_pt).map(|(&a, &b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if res < tol {
            let psi = problem.psi(&x);
            return Ok(ProxGradResult { x, psi, converged: true, iters: it });
        }
        if it == max_iter {
            break;
        }
        for i in 0..x.len() {
            shifted[i] = x[i] - step * g[i];
        }
        x = problem.regularizer.apply(&shifted, step);
        if !all_finite(&x) {
            return Err(Error::NonFinite { k: it as usize + 1 });
        }
        let psi = problem.psi(&x);
        if psi < best_psi {
            best_psi = psi;
            best_x.copy_from_slice(&x);
        }
    }
    Ok(ProxGradResult { x: best_x, psi: best_psi, converged: false, iters: max_iter })
}
