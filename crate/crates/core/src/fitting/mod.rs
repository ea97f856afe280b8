//! Least-squares extraction of decay constants, pumping parameters and T1.
//!
//! All fitters share a Levenberg-Marquardt core with a finite-difference
//! Jacobian. Rates and times are fitted as logarithms so they stay positive;
//! reported uncertainties are mapped back to natural units.

mod curves;
mod lm;
mod pumping;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curves::{fit_exponential_decay, fit_saturation_recovery};
pub use lm::{levenberg_marquardt, LmOptions, LmOutcome};
pub use pumping::{fit_pumping_curve, PumpingModel};
pub use trace::{parse_trace, read_trace, Trace};

use crate::units::{BOHR_MAGNETON, PLANCK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no convergence after {iterations} iterations (rss {rss:e})")]
    NonConvergence { iterations: usize, rss: f64 },

    #[error("parameters not identifiable: {0}")]
    Unidentifiable(String),

    #[error("data has the wrong trend for this model: {0}")]
    WrongSign(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("forward model failed: {0}")]
    Model(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    /// One standard deviation from the local curvature.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub rss: f64,
    /// When false the estimates are the last iterate, not an optimum.
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of a named parameter; panics if the fitter has no such name.
    pub fn value(&self, name: &str) -> f64 {
        self.param(name).unwrap_or_else(|| panic!("no parameter {name}")).value
    }

    pub fn stderr(&self, name: &str) -> f64 {
        self.param(name).unwrap_or_else(|| panic!("no parameter {name}")).stderr
    }

    /// Non-convergence as an error.
    pub fn require_converged(self) -> Result<Self, FitError> {
        if self.converged {
            Ok(self)
        } else {
            Err(FitError::NonConvergence {
                iterations: self.iterations,
                rss: self.rss,
            })
        }
    }
}

/// `g = hΔ_e/(μ_B B)` for a Zeeman splitting in GHz and a field in tesla.
pub fn lande_g_factor(delta_e_ghz: f64, b_tesla: f64) -> Result<f64, FitError> {
    if !(b_tesla > 0.0) {
        return Err(FitError::InvalidInput(format!("field must be > 0 T, got {b_tesla}")));
    }
    Ok(PLANCK * delta_e_ghz * 1e9 / (BOHR_MAGNETON * b_tesla))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lande_examples() {
        let g = lande_g_factor(37.1, 5.0).unwrap();
        assert!((g - 0.53).abs() < 1e-3, "{g}");
        assert_eq!(lande_g_factor(0.0, 5.0).unwrap(), 0.0);
        assert!((lande_g_factor(37.1, 10.0).unwrap() - 0.5 * g).abs() < 1e-15);
        assert!(lande_g_factor(37.1, 0.0).is_err());
    }
}
