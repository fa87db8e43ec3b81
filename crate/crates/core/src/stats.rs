//! Small numerical helpers shared by the test and estimation modules.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Upper tail of the chi-square distribution, clamped to `[0, 1]`.
pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    if !stat.is_finite() {
        return if stat > 0.0 { 0.0 } else { 1.0 };
    }
    if stat <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df)
        .map(|d| d.sf(stat).clamp(0.0, 1.0))
        .unwrap_or(f64::NAN)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Two-sided p-value of a Student t statistic.
pub fn student_t_two_sided(stat: f64, df: f64) -> f64 {
    if stat == 0.0 {
        return 1.0;
    }
    StudentsT::new(0.0, 1.0, df)
        .map(|d| (2.0 * d.sf(stat.abs())).clamp(0.0, 1.0))
        .unwrap_or(f64::NAN)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Central moments of order 2, 3 and 4 (population normalisation).
pub fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Ordinary least squares result.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coef: DVector<f64>,
    pub resid: DVector<f64>,
    pub ssr: f64,
    /// `(X'X)^-1`
    pub xtx_inv: DMatrix<f64>,
}

impl Ols {
    /// Classical standard error of coefficient `k`.
    pub fn std_err(&self, k: usize) -> f64 {
        let dof = self.resid.len() as f64 - self.coef.len() as f64;
        (self.ssr / dof * self.xtx_inv[(k, k)]).sqrt()
    }
}

/// Least squares via the normal equations with a Cholesky solve.
/// Returns `None` when `X'X` is numerically singular.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Option<Ols> {
    let xtx = x.transpose() * x;
    let scale = xtx.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let chol = xtx.clone().cholesky()?;
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min_pivot * min_pivot < 1e-12 * scale {
        return None;
    }
    let coef = chol.solve(&(x.transpose() * y));
    let resid = y - x * &coef;
    let ssr = resid.norm_squared();
    Some(Ols {
        coef,
        resid,
        ssr,
        xtx_inv: chol.inverse(),
    })
}
