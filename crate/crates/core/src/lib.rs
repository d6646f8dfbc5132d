//! Normal-map stochastic proximal methods for composite optimization.
//!
//! This crate implements solvers and diagnostics for problems of the form
//!
//! ```text
//!     min_x  ψ(x) = f(x) + φ(x)
//! ```
//!
//! where f is smooth (possibly nonconvex, often a finite sum amenable to
//! minibatching) and φ is convex with an inexpensive proximal operator.
//! The centerpiece is a normal-map-based stochastic proximal gradient
//! method that keeps a fixed proximal parameter λ while the step sizes
//! α_k decay, updating
//!
//! ```text
//!     z⁺ = z − α (g + (z − x)/λ),    x⁺ = prox_{λφ}(z⁺),
//! ```
//!
//! alongside the classical proximal SGD baseline x⁺ = prox_{αφ}(x − αg).
//! Around the solvers sit the pieces needed to *verify* their behavior
//! rather than take it on faith:
//!
//! - merit-function evaluation and an approximate-descent audit over
//!   step-size time windows ([`merit`], [`time_indices`],
//!   [`descent_audit`]),
//! - stationarity measures (normal map and natural residual,
//!   [`normal_map`], [`natural_residual`]),
//! - convergence-rate maps under Kurdyka–Łojasiewicz assumptions with an
//!   empirical log-log slope fitter ([`phi_rate`], [`fit_loglog_slope`]),
//! - a problem zoo (sparse tanh classification, least squares with ℓ1,
//!   separable power objectives) plus libsvm-format ingestion
//!   ([`make_problem`], [`parse_libsvm`]).
//!
//! Everything is deterministic given the seeds in [`RunConfig`]: minibatch
//! sampling and additive gradient noise draw from separate, documented
//! ChaCha8 streams.
//!
//! # Example
//!
//! ```
//! use normap::{make_problem, run_solver, Budget, Method, RunConfig, StepSchedule, SyntheticSpec};
//!
//! // A small ℓ1-regularized least-squares instance.
//! let spec = SyntheticSpec::quadratic_l1(
//!     vec![vec![1.0, 0.0], vec![0.0, 1.0]],
//!     vec![1.0, 0.2],
//!     0.25,
//! );
//! let built = make_problem(&spec).unwrap();
//!
//! let mut cfg = RunConfig::new(0.5, StepSchedule::constant(0.5).unwrap());
//! cfg.budget = Budget::Iters(400);
//! cfg.batch_size = built.problem.num_terms(); // full batch: exact gradients
//! cfg.lipschitz = built.lipschitz;
//!
//! let record = run_solver(&built.problem, &cfg, Method::NormSgd).unwrap();
//! let last = record.rows.last().unwrap();
//! assert!(last.fnat < 1e-8, "stationarity residual {}", last.fnat);
//! ```

pub mod composite;
pub mod diagnostics;
pub mod error;
pub mod problems;
pub mod prox;
pub mod rates;
pub mod solvers;
pub mod vecmath;

pub use composite::{natural_residual, normal_map, Batch, CompositeProblem, SmoothPart};
pub use diagnostics::{
    descent_audit, kl_time_window, merit, sparsity, time_indices, universal_time_window,
    window_errors, xi_from_lipschitz, AuditReport, ErrorSource, WindowErrors, WindowPartition,
};
pub use error::{Error, Result};
pub use problems::{
    gen_synthetic_classification, lipschitz_estimate, make_problem, make_problem_from_design,
    parse_libsvm, spectral_norm_sq, tanh_loss_grad, tanh_loss_value, write_libsvm, BuiltProblem,
    GaussianNoise, MinibatchSampler, ParsedLibsvm, PowerAbs, QuadraticLoss, SparseDesign,
    SpectralEstimate, SyntheticKind, SyntheticSpec, TanhLoss,
};
pub use prox::{moreau_env_grad, prox_elastic_net, prox_l1, shrink, ProxOracle};
pub use rates::{
    chung_simulate, fit_loglog_slope, gamma1_log_rate, phi_rate, phi_x_rate, psi_rate, psi_x_rate,
    tadic_psi_x_rate, ChungTrace, LogRate, RateParam, RateQuantity, RateQuery,
};
pub use solvers::{
    deterministic_prox_grad, norm_sgd_step, prox_sgd_step, run_solver, Budget, DiagnosticTrace,
    Iterates, Method, ProxGradResult, RunConfig, SolverState, StepSchedule, TrajectoryRecord,
    TrajectoryRow,
};
