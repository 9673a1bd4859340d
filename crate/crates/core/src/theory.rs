//! Closed-form limit parameters of the compound process.

use serde::Serialize;

use crate::engine::HawkesModel;
use crate::error::{Error, Result};
use crate::kernel::StabilityViolation;

fn check_l1(l1: f64) -> Result<()> {
    if !(0.0..1.0).contains(&l1) {
        return Err(Error::Stability(StabilityViolation::L1NotBelowOne { l1 }));
    }
    Ok(())
}

/// `γ² = μ ϑ² / (1 − ‖φ‖₁)`, the limit variance of the compensated functional.
pub fn gamma2(mu: f64, l1: f64, theta2: f64) -> Result<f64> {
    check_l1(l1)?;
    Ok(mu * theta2 / (1.0 - l1))
}

/// `σ² = μ / (1 − ‖φ‖₁)`.
pub fn sigma2(mu: f64, l1: f64) -> Result<f64> {
    gamma2(mu, l1, 1.0)
}

/// `ζ² = μ (ϑ² + ‖φ‖₁ (ϑ² − m²)(‖φ‖₁ − 2)) / (1 − ‖φ‖₁)³`, the limit
/// variance when the centering is `ϖT` instead of the compensator.
pub fn zeta2(mu: f64, l1: f64, theta2: f64, m: f64) -> Result<f64> {
    check_l1(l1)?;
    if theta2 < m * m - 1e-12 * theta2.abs().max(1.0) {
        return Err(Error::Config(format!(
            "second moment {theta2} is below the squared mean {}",
            m * m
        )));
    }
    let num = theta2 + l1 * (theta2 - m * m) * (l1 - 2.0);
    Ok(mu * num / (1.0 - l1).powi(3))
}

/// `ϖ = μ m / (1 − ‖φ‖₁)`, the long-run drift of `S`.
pub fn varpi(mu: f64, m: f64, l1: f64) -> Result<f64> {
    check_l1(l1)?;
    Ok(mu * m / (1.0 - l1))
}

/// `‖φ‖₁ (1 + ‖ψ‖₁)`, the bound on the expected surplus intensity mass of
/// one inserted point.
pub fn offspring_bound(l1: f64, psi_l1: f64) -> f64 {
    l1 * (1.0 + psi_l1)
}

/// Everything the experiments echo into their metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticParams {
    pub mu: f64,
    pub l1: f64,
    pub m: f64,
    pub theta2: f64,
    pub gamma2: f64,
    pub zeta2: f64,
    pub sigma2: f64,
    pub varpi: f64,
    /// `‖ψ‖₁ = ‖φ‖₁ / (1 − ‖φ‖₁)`.
    pub psi_l1: f64,
    pub offspring_bound: f64,
}

impl AsymptoticParams {
    pub fn new(mu: f64, l1: f64, m: f64, theta2: f64) -> Result<Self> {
        check_l1(l1)?;
        let psi_l1 = l1 / (1.0 - l1);
        Ok(AsymptoticParams {
            mu,
            l1,
            m,
            theta2,
            gamma2: gamma2(mu, l1, theta2)?,
            zeta2: zeta2(mu, l1, theta2, m)?,
            sigma2: sigma2(mu, l1)?,
            varpi: varpi(mu, m, l1)?,
            psi_l1,
            offspring_bound: offspring_bound(l1, psi_l1),
        })
    }

    pub fn from_model(model: &HawkesModel) -> Result<Self> {
        let moments = model.marks.moments();
        Self::new(model.mu, model.l1(), moments.mean, moments.second)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma2_examples() {
        assert_abs_diff_eq!(gamma2(2.0, 0.5, 1.0).unwrap(), 4.0);
        assert_abs_diff_eq!(gamma2(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(gamma2(1.0, 0.5, 4.0).unwrap(), 8.0);
        assert!(gamma2(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zeta2_examples() {
        assert_abs_diff_eq!(zeta2(1.0, 0.5, 1.0, 1.0).unwrap(), 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(zeta2(1.0, 0.5, 1.0, 0.5).unwrap(), 3.5, epsilon = 1e-12);
        assert!(zeta2(1.0, 1.2, 1.0, 0.0).is_err());
    }

    #[test]
    fn varpi_examples() {
        assert_abs_diff_eq!(varpi(1.0, 1.0, 0.5).unwrap(), 2.0);
        assert_abs_diff_eq!(varpi(1.0, 0.0, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(varpi(2.0, -1.0, 0.5).unwrap(), -4.0);
    }

    #[test]
    fn offspring_bound_examples() {
        assert_abs_diff_eq!(offspring_bound(0.5, 1.0), 1.0);
        assert_abs_diff_eq!(offspring_bound(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(offspring_bound(0.8, 4.0), 4.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn zeta2_equals_gamma2_for_centered_marks(
            mu in 0.01f64..10.0, l1 in 0.0f64..0.99, theta2 in 0.01f64..10.0
        ) {
            let z = zeta2(mu, l1, theta2, 0.0).unwrap();
            let g = gamma2(mu, l1, theta2).unwrap();
            prop_assert!((z - g).abs() <= 1e-9 * g.max(1.0));
        }

        #[test]
        fn gamma2_with_unit_second_moment_is_sigma2(mu in 0.01f64..10.0, l1 in 0.0f64..0.99) {
            prop_assert_eq!(gamma2(mu, l1, 1.0).unwrap(), sigma2(mu, l1).unwrap());
        }

        #[test]
        fn parameters_are_positive(
            mu in 0.01f64..10.0, l1 in 0.0f64..0.99, m in -3.0f64..3.0, excess in 0.01f64..5.0
        ) {
            let p = AsymptoticParams::new(mu, l1, m, m * m + excess).unwrap();
            prop_assert!(p.gamma2 > 0.0 && p.zeta2 > 0.0 && p.sigma2 > 0.0);
            prop_assert!((p.offspring_bound - p.psi_l1).abs() <= 1e-9 * p.psi_l1.max(1.0));
        }
    }
}
