//! Proximity operators and the Moreau-envelope gradient.
//!
//! The regularizers supported here (zero, ℓ1, elastic net) all have
//! closed-form proximity operators built from componentwise soft
//! thresholding, so a prox evaluation costs one pass over the vector.

use crate::error::{Error, Result};
use crate::vecmath::{norm1, dot};

/// Scalar soft-thresholding: `sgn(z) * max(0, |z| - t)`.
#[inline]
pub fn shrink(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// A regularizer φ together with its proximity operator `prox_{λφ}`.
///
/// The scaling λ is *not* part of the oracle; it is supplied per call so a
/// single oracle serves both a fixed-λ solver and a step-dependent one.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxOracle {
    /// φ ≡ 0; the prox is the identity map.
    Zero,
    /// φ(x) = ν‖x‖₁.
    L1 { nu: f64 },
    /// φ(x) = ν1‖x‖₁ + ν2‖x‖².
    ElasticNet { nu1: f64, nu2: f64 },
}

impl ProxOracle {
    pub fn zero() -> Self {
        ProxOracle::Zero
    }

    pub fn l1(nu: f64) -> Result<Self> {
        if !(nu >= 0.0) {
            return Err(Error::InvalidParameter(format!("l1 scale nu = {nu} must be >= 0")));
        }
        Ok(ProxOracle::L1 { nu })
    }

    pub fn elastic_net(nu1: f64, nu2: f64) -> Result<Self> {
        if !(nu1 >= 0.0) || !(nu2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "elastic net scales (nu1, nu2) = ({nu1}, {nu2}) must be >= 0"
            )));
        }
        Ok(ProxOracle::ElasticNet { nu1, nu2 })
    }

    /// The regularizer value φ(x).
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            ProxOracle::Zero => 0.0,
            ProxOracle::L1 { nu } => nu * norm1(x),
            ProxOracle::ElasticNet { nu1, nu2 } => nu1 * norm1(x) + nu2 * dot(x, x),
        }
    }

    /// Writes `prox_{λφ}(z)` into `out`. λ must be positive.
    pub fn apply_into(&self, z: &[f64], lambda: f64, out: &mut [f64]) {
        debug_assert!(lambda > 0.0);
        debug_assert_eq!(z.len(), out.len());
        match *self {
            ProxOracle::Zero => out.copy_from_slice(z),
            ProxOracle::L1 { nu } => {
                let t = lambda * nu;
                for (o, &zi) in out.iter_mut().zip(z) {
                    *o = shrink(zi, t);
                }
            }
            ProxOracle::ElasticNet { nu1, nu2 } => {
                // Minimizing λν1|x| + λν2 x² + ½(x−z)² per coordinate gives
                // (1 + 2λν2) x + λν1 ∂|x| ∋ z, i.e. shrink then divide.
                let t = lambda * nu1;
                let scale = 1.0 + 2.0 * lambda * nu2;
                for (o, &zi) in out.iter_mut().zip(z) {
                    *o = shrink(zi, t) / scale;
                }
            }
        }
    }

    /// Allocating variant of [`ProxOracle::apply_into`].
    pub fn apply(&self, z: &[f64], lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        self.apply_into(z, lambda, &mut out);
        out
    }
}

/// Componentwise soft thresholding of a vector at threshold `t >= 0`.
///
/// ```
/// let y = normap::prox_l1(&[1.2, -0.3, 0.0], 0.5).unwrap();
/// assert_eq!(y, vec![0.7, 0.0, 0.0]);
/// ```
pub fn prox_l1(z: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("shrinkage threshold t = {t} must be >= 0")));
    }
    Ok(z.iter().map(|&zi| shrink(zi, t)).collect())
}

/// Proximity operator of the elastic net φ(x) = ν1‖x‖₁ + ν2‖x‖²:
/// `shrink(z, λν1) / (1 + 2λν2)` componentwise.
pub fn prox_elastic_net(z: &[f64], lambda: f64, nu1: f64, nu2: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("prox scaling lambda = {lambda} must be > 0")));
    }
    let oracle = ProxOracle::elastic_net(nu1, nu2)?;
    Ok(oracle.apply(z, lambda))
}

/// Gradient of the Moreau envelope of φ at `z`, namely `(z - x)/λ`, where the
/// caller supplies `x = prox_{λφ}(z)` to avoid recomputing the prox inside
/// solver loops.
pub fn moreau_env_grad(z: &[f64], x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    if z.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: x.len() });
    }
    Ok(z.iter().zip(x).map(|(&zi, &xi)| (zi - xi) / lambda).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrinkage_matches_hand_values() {
        assert_eq!(prox_l1(&[1.2, -0.3, 0.0], 0.5).unwrap(), vec![0.7, 0.0, 0.0]);
        assert_eq!(prox_l1(&[-2.0], 1.0).unwrap(), vec![-1.0]);
    }

    #[test]
    fn zero_threshold_is_identity() {
        assert_eq!(prox_l1(&[1.2, -0.3], 0.0).unwrap(), vec![1.2, -0.3]);
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(matches!(prox_l1(&[1.0], -0.1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn elastic_net_shrinks_then_scales() {
        // shrink(1.0, 0.5*0.2) = 0.9, then divide by 1 + 2*0.5*0.5 = 1.5.
        let y = prox_elastic_net(&[1.0], 0.5, 0.2, 0.5).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn elastic_net_with_vanishing_regularizer_is_identity() {
        assert_eq!(prox_elastic_net(&[1.3, -0.2], 1.0, 0.0, 0.0).unwrap(), vec![1.3, -0.2]);
    }

    #[test]
    fn elastic_net_fixes_zero() {
        assert_eq!(prox_elastic_net(&[0.0], 2.0, 0.7, 0.3).unwrap(), vec![0.0]);
    }

    #[test]
    fn elastic_net_rejects_nonpositive_lambda() {
        assert!(prox_elastic_net(&[1.0], 0.0, 0.1, 0.1).is_err());
        assert!(prox_elastic_net(&[1.0], -1.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn envelope_gradient_hand_value() {
        let g = moreau_env_grad(&[1.2], &[0.7], 0.5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_gradient_vanishes_at_prox_fixed_points() {
        // φ ≡ 0 has prox = identity, so x = z and the gradient is zero.
        let z = [0.4, -2.0, 7.5];
        let x = ProxOracle::zero().apply(&z, 3.0);
        assert_eq!(moreau_env_grad(&z, &x, 3.0).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(moreau_env_grad(&z, &z, 0.25).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn envelope_gradient_rejects_dimension_mismatch() {
        assert!(matches!(
            moreau_env_grad(&[1.0, 2.0], &[1.0], 1.0),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn oracle_l1_agrees_with_free_function() {
        let oracle = ProxOracle::l1(0.4).unwrap();
        let z = [3.0, -0.1, 0.2, -5.0];
        assert_eq!(oracle.apply(&z, 2.5), prox_l1(&z, 1.0).unwrap());
    }

    #[test]
    fn oracle_values() {
        let x = [1.0, -2.0];
        assert_eq!(ProxOracle::zero().value(&x), 0.0);
        assert_eq!(ProxOracle::l1(0.5).unwrap().value(&x), 1.5);
        let en = ProxOracle::elastic_net(0.5, 2.0).unwrap();
        assert!((en.value(&x) - (1.5 + 10.0)).abs() < 1e-15);
    }

    #[test]
    fn oracle_constructors_reject_negative_scales() {
        assert!(ProxOracle::l1(-0.5).is_err());
        assert!(ProxOracle::elastic_net(-0.1, 0.0).is_err());
        assert!(ProxOracle::elastic_net(0.1, -0.2).is_err());
    }
}
