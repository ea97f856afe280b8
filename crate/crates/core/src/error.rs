use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("steady state is not unique: null space has dimension {dim}")]
    DegenerateSteadyState { dim: usize },

    #[error("integration failed at t = {t_ns} ns: {reason}")]
    Integration { t_ns: f64, reason: String },

    #[error("Fock truncation did not converge below {tol:e} up to n_max = {n_max}")]
    Truncation { n_max: usize, tol: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("weak-excitation regime unattainable: {0}")]
    WeakExcitation(String),

    #[error("target unattainable: needs {needed}")]
    Unattainable { needed: f64 },

    #[error("mislabeled states: n_up = {n_up} < n_down = {n_down}")]
    Mislabeled { n_up: f64, n_down: f64 },

    #[error("fit failed: {0}")]
    Fit(#[from] crate::fitting::FitError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
