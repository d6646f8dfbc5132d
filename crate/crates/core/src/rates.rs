//! KL convergence-rate maps, empirical slope fitting, and the generalized
//! Chung recursion simulator.
//!
//! Under a Kurdyka–Łojasiewicz inequality with exponent θ ∈ [0, 1), the
//! attainable convergence rates of the normal-map method are piecewise
//! functions of θ and the step-size decay. Two parameterizations are used:
//! an abstract one through r > ½ (maps Ψ_r for function values / squared
//! residuals and Ψ_r^x for iterate distances) and a concrete one through
//! the polynomial step exponent γ ∈ (⅔, 1) (maps Φ_γ, Φ_γ^x). The two are
//! consistent: Φ_γ = (1−γ)·Ψ_r with r = (2γ−1)/(2(1−γ)), which the tests
//! exercise as an algebraic cross-check. The boundary case γ = 1 yields
//! logarithmic-over-polynomial rates handled by [`gamma1_log_rate`].
//!
//! All maps interpret a returned exponent ρ as a guarantee of order
//! k^{−ρ}. At the branch threshold both pieces agree (the maps are
//! continuous); the second branch is used there.

use crate::error::{Error, Result};

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("KL exponent theta = {theta} must lie in [0, 1)")));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.5) {
        return Err(Error::InvalidParameter(format!("rate parameter r = {r} must be > 1/2")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma == 1.0 {
        return Err(Error::InvalidParameter(
            "gamma = 1 has logarithmic rates; use gamma1_log_rate".into(),
        ));
    }
    if !(gamma > 2.0 / 3.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "no rate guarantee for gamma = {gamma}; the polynomial branch needs gamma in (2/3, 1)"
        )));
    }
    Ok(())
}

/// Ψ_r(θ): exponent for ψ-gap and ‖F_nat‖² decay, r > ½.
pub fn psi_rate(r: f64, theta: f64) -> Result<f64> {
    check_r(r)?;
    check_theta(theta)?;
    Ok(if theta < (1.0 + 2.0 * r) / (4.0 * r) { 2.0 * r } else { 1.0 / (2.0 * theta - 1.0) })
}

/// Ψ_r^x(θ): exponent for iterate-distance decay, r > ½.
pub fn psi_x_rate(r: f64, theta: f64) -> Result<f64> {
    check_r(r)?;
    check_theta(theta)?;
    Ok(if theta < (1.0 + 2.0 * r) / (4.0 * r) {
        r - 0.5
    } else {
        (1.0 - theta) / (2.0 * theta - 1.0)
    })
}

/// Φ_γ(θ): ψ-gap / ‖F_nat‖² exponent under the schedule α_k = α/(β+k)^γ,
/// γ ∈ (⅔, 1).
pub fn phi_rate(gamma: f64, theta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_theta(theta)?;
    Ok(if theta < gamma / (4.0 * gamma - 2.0) {
        2.0 * gamma - 1.0
    } else {
        (1.0 - gamma) / (2.0 * theta - 1.0)
    })
}

/// Φ_γ^x(θ): iterate-distance exponent under the same schedule.
pub fn phi_x_rate(gamma: f64, theta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_theta(theta)?;
    Ok(if theta < gamma / (4.0 * gamma - 2.0) {
        1.5 * gamma - 1.0
    } else {
        (1.0 - theta) * (1.0 - gamma) / (2.0 * theta - 1.0)
    })
}

/// The comparison baseline Ψ_r^{x,∘}(θ) = min{r−1, (1−θ)/(2θ−1)} from the
/// time-scale literature, defined for r > 1 and θ ∈ [½, 1). At θ = ½ the
/// second term is +∞ and the first binds.
pub fn tadic_psi_x_rate(r: f64, theta: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::InvalidParameter(format!("baseline rate needs r > 1, got {r}")));
    }
    if !(0.5..1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "baseline rate needs theta in [1/2, 1), got {theta}"
        )));
    }
    let second = if theta == 0.5 { f64::INFINITY } else { (1.0 - theta) / (2.0 * theta - 1.0) };
    Ok((r - 1.0).min(second))
}

/// Which trajectory quantity a rate statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateQuantity {
    PsiGap,
    FnatSq,
    IterateDist,
}

/// A rate of the form log(k)^p / k^q, as arises for γ = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRate {
    /// Exponent of k (negative: decay).
    pub k_exponent: f64,
    /// Exponent of log k.
    pub log_exponent: f64,
}

/// Rates for the boundary schedule γ = 1 (steps α/(β+k)): ψ-gap and
/// ‖F_nat‖² decay like log(k)^{1+ε}/k, iterate distances like
/// log(k)^{½+ε}/√k, for any ε > 0.
pub fn gamma1_log_rate(quantity: RateQuantity, epsilon: f64) -> Result<LogRate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be > 0 (open condition)")));
    }
    Ok(match quantity {
        RateQuantity::PsiGap | RateQuantity::FnatSq => {
            LogRate { k_exponent: -1.0, log_exponent: 1.0 + epsilon }
        }
        RateQuantity::IterateDist => LogRate { k_exponent: -0.5, log_exponent: 0.5 + epsilon },
    })
}

/// Parameterization of a rate query: the abstract r or the schedule γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateParam {
    R(f64),
    Gamma(f64),
}

/// A (quantity, parameterization, θ) triple that resolves to a polynomial
/// decay exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuery {
    pub kind: RateQuantity,
    pub param: RateParam,
    pub theta: f64,
}

impl RateQuery {
    /// The predicted decay exponent (the quantity behaves like k^{−exponent}).
    pub fn exponent(&self) -> Result<f64> {
        match (self.kind, self.param) {
            (RateQuantity::IterateDist, RateParam::R(r)) => psi_x_rate(r, self.theta),
            (RateQuantity::IterateDist, RateParam::Gamma(g)) => phi_x_rate(g, self.theta),
            (_, RateParam::R(r)) => psi_rate(r, self.theta),
            (_, RateParam::Gamma(g)) => phi_rate(g, self.theta),
        }
    }
}

/// Least-squares slope of log(value) against log(k) over the points with
/// k ≥ burn_in. Returns (slope, r²). Needs at least 10 points past the
/// burn-in, all with strictly positive k and value.
pub fn fit_loglog_slope(series: &[(f64, f64)], burn_in: usize) -> Result<(f64, f64)> {
    let cut = burn_in as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(k, v) in series.iter().filter(|(k, _)| *k >= cut) {
        if !(k > 0.0) || !(v > 0.0) || !k.is_finite() || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "log-log fit needs positive finite points; got (k, value) = ({k}, {v})"
            )));
        }
        xs.push(k.ln());
        ys.push(v.ln());
    }
    if xs.len() < 10 {
        return Err(Error::Precondition(format!(
            "log-log fit needs at least 10 points after burn-in, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all fit points share the same k".into()));
    }
    let slope = sxy / sxx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy <= 1e-30 { 1.0 } else { 1.0 - ss_res / syy };
    Ok((slope, r2))
}

/// Trace of the recursion a_{k+1} = (1 − 1/s(b_k))·a_k + 1/t(b_k).
#[derive(Debug, Clone)]
pub struct ChungTrace {
    /// a_k for k = 0..=n.
    pub a: Vec<f64>,
    /// a_k / κ(b_k) with κ = s/t; the recursion's conclusion is that this
    /// ratio stays bounded.
    pub ratios: Vec<f64>,
    /// Report-grade plateau heuristic: the ratio over the second half of
    /// the run never exceeds 10× its value at the midpoint. Not a proof —
    /// a screening check for the simulated instances.
    pub bounded: bool,
}

/// Simulates the generalized-Chung recursion for `n` steps from a_0 = `a0`,
/// where `s`, `t` are evaluated on the caller-supplied sequence b_k.
///
/// Requires s(b_k) > 1 along the whole run (otherwise the recursion does
/// not contract and the simulation aborts with a precondition error).
/// `t` may return +∞ to model a vanishing additive term; the ratio trace
/// is then degenerate (κ = 0) and only the `a` trace is meaningful.
pub fn chung_simulate(
    s: impl Fn(f64) -> f64,
    t: impl Fn(f64) -> f64,
    b: impl Fn(u64) -> f64,
    a0: f64,
    n: u64,
) -> Result<ChungTrace> {
    if !(a0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("a0 = {a0} must be >= 0")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    let mut a = Vec::with_capacity(n as usize + 1);
    let mut ratios = Vec::with_capacity(n as usize + 1);
    let mut ak = a0;
    for k in 0..=n {
        let bk = b(k);
        let sk = s(bk);
        if !(sk > 1.0) {
            return Err(Error::Precondition(format!(
                "s(b_k) = {sk} at k = {k} violates s > 1; the recursion does not contract"
            )));
        }
        let tk = t(bk);
        if !(tk > 0.0) {
            return Err(Error::InvalidParameter(format!("t(b_k) = {tk} at k = {k} must be > 0")));
        }
        let kappa = sk / tk;
        a.push(ak);
        ratios.push(if kappa > 0.0 { ak / kappa } else { f64::INFINITY });
        if k < n {
            ak = (1.0 - 1.0 / sk) * ak + 1.0 / tk;
        }
    }
    let half = (n / 2) as usize;
    let pivot = ratios[half];
    let max_tail = ratios[half..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bounded = pivot.is_finite() && max_tail <= 10.0 * pivot.max(f64::MIN_POSITIVE);
    Ok(ChungTrace { a, ratios, bounded })
}
