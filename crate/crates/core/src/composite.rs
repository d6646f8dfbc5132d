//! Composite problems ψ = f + φ and the two stationarity measures.
//!
//! A [`CompositeProblem`] bundles a smooth part f — supplied through the
//! [`SmoothPart`] trait so data-backed losses and synthetic test functions
//! share one interface — with the prox-friendly regularizer φ. Stationarity
//! is measured either through the natural residual
//!
//! > F_nat(x) = x − prox_{λφ}(x − λ∇f(x)),
//!
//! which lives in x-space, or through the normal map
//!
//! > F_nor(z) = ∇f(prox_{λφ}(z)) + (z − prox_{λφ}(z))/λ,
//!
//! which lives in z-space and drives the normal-map solver. Zeros of either
//! map correspond to stationary points of ψ.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::prox::ProxOracle;
use crate::vecmath::all_finite;

/// Which part of a finite-sum objective a stochastic gradient should touch.
///
/// `Full` must produce the exact gradient ∇f(x) — callers rely on this to
/// switch off stochasticity without changing code paths — while `Indices`
/// averages the component gradients named by the (not necessarily sorted)
/// index slice.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    Full,
    Indices(&'a [usize]),
}

/// Oracle access to a smooth function f: value, full gradient, and (for
/// finite sums f = 1/N Σ f_i) minibatch stochastic gradients.
pub trait SmoothPart: Send + Sync {
    /// Ambient dimension d of the variable.
    fn dim(&self) -> usize;

    /// Number of summands N for finite-sum objectives; 1 when f has no such
    /// structure (the whole function is its own single "component").
    fn num_terms(&self) -> usize {
        1
    }

    /// f(x).
    fn value(&self, x: &[f64]) -> f64;

    /// Writes ∇f(x) into `out`.
    fn grad_into(&self, x: &[f64], out: &mut [f64]);

    /// Writes a stochastic gradient estimate into `out`.
    ///
    /// With `Batch::Full` this must equal [`SmoothPart::grad_into`] exactly
    /// (no noise, bit-for-bit). The default implementation supports only
    /// that case and rejects index batches, which is appropriate for smooth
    /// parts without finite-sum structure.
    fn stochastic_grad_into(
        &self,
        x: &[f64],
        batch: Batch<'_>,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<()> {
        let _ = rng;
        match batch {
            Batch::Full => {
                self.grad_into(x, out);
                Ok(())
            }
            Batch::Indices(_) => Err(Error::Precondition(
                "smooth part has no finite-sum structure; use Batch::Full".into(),
            )),
        }
    }
}

/// The composite objective ψ(x) = f(x) + φ(x).
pub struct CompositeProblem {
    pub smooth: Box<dyn SmoothPart>,
    pub regularizer: ProxOracle,
    /// Optional known lower bound on ψ, used as a sanity reference by
    /// diagnostics; not required by the solvers.
    pub lower_bound_hint: Option<f64>,
}

impl CompositeProblem {
    pub fn new(smooth: Box<dyn SmoothPart>, regularizer: ProxOracle) -> Self {
        CompositeProblem { smooth, regularizer, lower_bound_hint: None }
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn num_terms(&self) -> usize {
        self.smooth.num_terms()
    }

    /// f(x).
    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        self.smooth.value(x)
    }

    /// ∇f(x), allocating.
    pub fn smooth_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.smooth.grad_into(x, &mut g);
        g
    }

    /// The full objective ψ(x) = f(x) + φ(x).
    pub fn psi(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.regularizer.value(x)
    }

    /// prox_{λφ}(z), allocating.
    pub fn prox(&self, z: &[f64], lambda: f64) -> Vec<f64> {
        self.regularizer.apply(z, lambda)
    }
}

/// Natural residual F_nat(x) = x − prox_{λφ}(x − λ∇f(x)).
///
/// Vanishes exactly at stationary points of ψ; callers typically track its
/// norm. Requires λ > 0.
pub fn natural_residual(problem: &CompositeProblem, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x.len() });
    }
    let mut step = problem.smooth_grad(x);
    for (s, &xi) in step.iter_mut().zip(x) {
        *s = xi - lambda * *s;
    }
    let prox_pt = problem.regularizer.apply(&step, lambda);
    Ok(x.iter().zip(&prox_pt).map(|(&xi, &pi)| xi - pi).collect())
}

/// Normal map F_nor(z) = ∇f(x) + (z − x)/λ with x = prox_{λφ}(z).
///
/// Returns `(F_nor, x)`: the prox point is handed back so a solver step pays
/// for exactly one prox evaluation, never two.
pub fn normal_map(
    problem: &CompositeProblem,
    z: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    if z.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: z.len() });
    }
    let x = problem.regularizer.apply(z, lambda);
    let mut fnor = problem.smooth_grad(&x);
    for ((fi, &zi), &xi) in fnor.iter_mut().zip(z).zip(&x) {
        *fi += (zi - xi) / lambda;
    }
    if !all_finite(&fnor) {
        return Err(Error::NonFinite { k: 0 });
    }
    Ok((fnor, x))
}
