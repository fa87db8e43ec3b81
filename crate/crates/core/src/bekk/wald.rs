use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::params::idx;
use super::{BekkError, BekkFit};
use crate::stats::chi2_sf;

/// Which off-diagonal pair of a bivariate fit is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Column 1 into column 2: `a12`, `b12`.
    FirstToSecond,
    /// Column 2 into column 1: `a21`, `b21`.
    SecondToFirst,
}

impl Direction {
    /// Indices of the ARCH and GARCH coefficients carrying this direction.
    pub fn coefficient_indices(self) -> (usize, usize) {
        match self {
            Direction::FirstToSecond => (idx::A12, idx::B12),
            Direction::SecondToFirst => (idx::A21, idx::B21),
        }
    }
}

/// Joint Wald test of both spillover coefficients in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldResult {
    pub a_off: f64,
    pub b_off: f64,
    /// `|a_off| + |b_off|`
    pub weight: f64,
    pub wald_stat: f64,
    pub p_value: f64,
}

/// Off-diagonal coefficients and spillover weight without a test.
pub fn spillover_weight(fit: &BekkFit, direction: Direction) -> (f64, f64, f64) {
    let v = fit.params.to_vec();
    let (ia, ib) = direction.coefficient_indices();
    (v[ia], v[ib], v[ia].abs() + v[ib].abs())
}

/// Tests `H0: a_off = b_off = 0` with `W = r' V_r^-1 r ~ chi2(2)`.
pub fn wald_spillover(fit: &BekkFit, direction: Direction) -> Result<WaldResult, BekkError> {
    let cov = fit.param_cov.as_ref().ok_or(BekkError::Untestable)?;
    let (ia, ib) = direction.coefficient_indices();
    let (a_off, b_off, weight) = spillover_weight(fit, direction);
    let r = Vector2::new(a_off, b_off);
    let vr = Matrix2::new(cov[(ia, ia)], cov[(ia, ib)], cov[(ib, ia)], cov[(ib, ib)]);
    let wald_stat = wald_statistic(&r, &vr)?;
    Ok(WaldResult {
        a_off,
        b_off,
        weight,
        wald_stat,
        p_value: chi2_sf(wald_stat, 2.0),
    })
}

/// `r' V^-1 r`, rejecting singular or indefinite `V`.
pub fn wald_statistic(r: &Vector2<f64>, v: &Matrix2<f64>) -> Result<f64, BekkError> {
    let det = v.determinant();
    if !(v[(0, 0)] > 0.0 && det > 1e-14 * v[(0, 0)] * v[(1, 1)]) || !det.is_finite() {
        return Err(BekkError::Untestable);
    }
    let inv = v.try_inverse().ok_or(BekkError::Untestable)?;
    let stat = (r.transpose() * inv * r)[0];
    Ok(stat.max(0.0))
}
