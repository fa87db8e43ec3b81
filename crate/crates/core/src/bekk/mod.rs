//! Bivariate VAR(1)-GARCH-BEKK(1,1): likelihood, estimation and the Wald
//! test for directional volatility spillover.

mod fit;
mod likelihood;
mod params;
mod wald;

use thiserror::Error;

pub use fit::{fit_bekk, BekkFit, FitOptions, GradientMode, MIN_OBSERVATIONS};
pub use likelihood::{conditional_covariances, neg_loglik, neg_loglik_gradient};
pub use params::{canonical_signs, idx, BekkParams, N_PARAMS, PARAM_NAMES};
pub use wald::{spillover_weight, wald_spillover, wald_statistic, Direction, WaldResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BekkError {
    #[error("expected a two-column series matrix, got {0} columns")]
    WrongShape(usize),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("column {0} is constant")]
    DegenerateSeries(usize),
    #[error("initial parameters give a non-positive-definite covariance")]
    InfeasibleStart,
    #[error("parameter covariance unavailable or singular; spillover untestable")]
    Untestable,
}
