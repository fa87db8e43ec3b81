//! Maximum-likelihood estimation.
//!
//! Both columns are standardised before optimisation and the estimates are
//! mapped back afterwards. The map is linear in the parameters and the
//! likelihoods differ only by the Jacobian constant `n ln(s1 s2)`, so the
//! maximiser and its covariance transform exactly:
//!
//! ```text
//! phi_x = D phi_y D^-1      C_x = C_y D      A_x = D^-1 A_y D
//! mu_x  = m + D mu_y - phi_x m                B_x = D^-1 B_y D
//! ```
//!
//! with `D = diag(s1, s2)` and `m` the column means.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::likelihood::{evaluate, rows_of, Want};
use super::params::{canonical_signs, idx, BekkParams, N_PARAMS};
use super::BekkError;
use crate::optim::{self, BfgsOptions};
use crate::stats::ols;

/// Smallest sample accepted by [`fit_bekk`].
pub const MIN_OBSERVATIONS: usize = 30;

const INIT_ARCH: f64 = 0.15;
const INIT_GARCH: f64 = 0.8;

/// How the optimiser obtains gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Exact gradient propagated through the variance recursion.
    #[default]
    Analytic,
    /// Central finite differences of the likelihood.
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Tolerance on the Euclidean norm of the per-observation gradient of
    /// the standardised problem.
    pub grad_tol: f64,
    /// Seeds the perturbation used for the single restart.
    pub seed: u64,
    /// Sandwich (QML) covariance instead of the inverse observed information.
    pub robust: bool,
    pub gradient: GradientMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            seed: 0,
            robust: false,
            gradient: GradientMode::Analytic,
        }
    }
}

/// An estimated bivariate model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BekkFit {
    pub params: BekkParams,
    pub loglik: f64,
    /// Covariance of the estimates in [`BekkParams::to_vec`] order; `None`
    /// when the observed information could not be inverted.
    pub param_cov: Option<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Whether the restart from a perturbed start was used.
    pub restarted: bool,
    /// Spectral radius of `A (x) A + B (x) B`.
    pub persistence: f64,
    pub stationary: bool,
    /// Number of residuals entering the likelihood (`T - 1`).
    pub n_obs: usize,
}

impl BekkFit {
    /// Standard errors, when the covariance is available.
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.param_cov
            .as_ref()
            .map(|v| (0..N_PARAMS).map(|k| v[(k, k)].max(0.0).sqrt()).collect())
    }
}

struct Scaling {
    mean: [f64; 2],
    sd: [f64; 2],
}

impl Scaling {
    fn of(x: &[[f64; 2]]) -> Self {
        let n = x.len() as f64;
        let mut mean = [0.0; 2];
        let mut sd = [0.0; 2];
        for k in 0..2 {
            mean[k] = x.iter().map(|r| r[k]).sum::<f64>() / n;
            sd[k] = (x.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        }
        Self { mean, sd }
    }

    fn apply(&self, x: &[[f64; 2]]) -> Vec<[f64; 2]> {
        x.iter()
            .map(|r| {
                [
                    (r[0] - self.mean[0]) / self.sd[0],
                    (r[1] - self.mean[1]) / self.sd[1],
                ]
            })
            .collect()
    }

    /// Jacobian `d theta_raw / d theta_std` of the (affine) back-transform.
    fn jacobian(&self) -> DMatrix<f64> {
        use idx::*;
        let s = self.sd;
        let m = self.mean;
        let mut j = DMatrix::zeros(N_PARAMS, N_PARAMS);
        let phi = [[PHI11, PHI12], [PHI21, PHI22]];
        let mu = [MU1, MU2];
        for k in 0..2 {
            j[(mu[k], mu[k])] = s[k];
            for l in 0..2 {
                j[(phi[k][l], phi[k][l])] = s[k] / s[l];
                j[(mu[k], phi[k][l])] = -s[k] * m[l] / s[l];
            }
        }
        j[(C11, C11)] = s[0];
        j[(C21, C21)] = s[0];
        j[(C22, C22)] = s[1];
        let loads = [[A11, A12], [A21, A22]];
        let garch = [[B11, B12], [B21, B22]];
        for k in 0..2 {
            for l in 0..2 {
                j[(loads[k][l], loads[k][l])] = s[l] / s[k];
                j[(garch[k][l], garch[k][l])] = s[l] / s[k];
            }
        }
        j
    }

    fn to_raw(&self, theta: &[f64]) -> Vec<f64> {
        let j = self.jacobian();
        let mut out: Vec<f64> = (j * DVector::from_column_slice(theta)).iter().copied().collect();
        out[idx::MU1] += self.mean[0];
        out[idx::MU2] += self.mean[1];
        out
    }
}

/// Mean parameters by equation-wise least squares and variance parameters by
/// variance targeting with `A = 0.15 I`, `B = 0.8 I`.
fn initial_values(y: &[[f64; 2]]) -> Option<Vec<f64>> {
    use idx::*;
    let n = y.len() - 1;
    let design = DMatrix::from_fn(n, 3, |r, c| if c == 0 { 1.0 } else { y[r][c - 1] });
    let mut theta = vec![0.0; N_PARAMS];
    let mut resid = [DVector::zeros(n), DVector::zeros(n)];
    for k in 0..2 {
        let target = DVector::from_fn(n, |r, _| y[r + 1][k]);
        let fit = ols(&target, &design)?;
        theta[if k == 0 { MU1 } else { MU2 }] = fit.coef[0];
        theta[if k == 0 { PHI11 } else { PHI21 }] = fit.coef[1];
        theta[if k == 0 { PHI12 } else { PHI22 }] = fit.coef[2];
        resid[k] = fit.resid;
    }
    let cov = |a: &DVector<f64>, b: &DVector<f64>| a.dot(b) / n as f64;
    let sigma = Matrix2::new(
        cov(&resid[0], &resid[0]),
        cov(&resid[0], &resid[1]),
        cov(&resid[1], &resid[0]),
        cov(&resid[1], &resid[1]),
    );
    let target = sigma * (1.0 - INIT_ARCH * INIT_ARCH - INIT_GARCH * INIT_GARCH);
    let c = BekkParams::c_from_intercept(&target)?;
    theta[C11] = c[(0, 0)];
    theta[C21] = c[(1, 0)];
    theta[C22] = c[(1, 1)];
    theta[A11] = INIT_ARCH;
    theta[A22] = INIT_ARCH;
    theta[B11] = INIT_GARCH;
    theta[B22] = INIT_GARCH;
    Some(theta)
}

fn perturb(theta: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995_9e37_79b9);
    let mut out = theta.to_vec();
    for v in out.iter_mut() {
        let u: f64 = rng.random_range(-1.0..1.0);
        *v += 0.05 * u * v.abs().max(0.1);
    }
    out
}

/// Average negative log-likelihood and gradient for the optimiser.
fn objective(y: &[[f64; 2]], mode: GradientMode) -> impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)> + '_ {
    let nf = (y.len() - 1) as f64;
    move |theta: &[f64]| match mode {
        GradientMode::Analytic => {
            let ev = evaluate(theta, y, Want::Gradient)?;
            let g = ev.grad?.iter().map(|v| -v / nf).collect();
            Some((-ev.loglik / nf, g))
        }
        GradientMode::Numerical => {
            let mut f = |t: &[f64]| evaluate(t, y, Want::Value).map(|e| -e.loglik / nf);
            let value = f(theta)?;
            let g = optim::numerical_gradient(&mut f, theta, 1e-6)?;
            Some((value, g))
        }
    }
}

/// Observed information of the total log-likelihood by central differences
/// of the analytic gradient, step `1e-5 * max(1, |theta_k|)`.
fn observed_information(theta: &[f64], y: &[[f64; 2]]) -> Option<DMatrix<f64>> {
    let mut info = DMatrix::zeros(N_PARAMS, N_PARAMS);
    let mut probe = theta.to_vec();
    for k in 0..N_PARAMS {
        let h = 1e-5 * theta[k].abs().max(1.0);
        probe[k] = theta[k] + h;
        let up = evaluate(&probe, y, Want::Gradient)?.grad?;
        probe[k] = theta[k] - h;
        let dn = evaluate(&probe, y, Want::Gradient)?.grad?;
        probe[k] = theta[k];
        for j in 0..N_PARAMS {
            info[(j, k)] = -(up[j] - dn[j]) / (2.0 * h);
        }
    }
    let sym = (&info + info.transpose()) * 0.5;
    Some(sym)
}

fn covariance(theta: &[f64], y: &[[f64; 2]], robust: bool) -> Option<DMatrix<f64>> {
    let info = observed_information(theta, y)?;
    let chol = info.cholesky()?;
    let inv = chol.inverse();
    if !robust {
        return Some(inv);
    }
    let scores = evaluate(theta, y, Want::Scores)?.scores?;
    let mut opg = DMatrix::zeros(N_PARAMS, N_PARAMS);
    for s in &scores {
        let v = DVector::from_column_slice(s);
        opg += &v * v.transpose();
    }
    Some(&inv * opg * &inv)
}

/// Fits the bivariate model to the `T x 2` matrix `x` by maximum likelihood.
///
/// A run that fails to reach the gradient tolerance is retried once from a
/// perturbed start; if that also fails the better of the two is returned
/// with `converged = false`.
pub fn fit_bekk(x: &DMatrix<f64>, opts: &FitOptions) -> Result<BekkFit, BekkError> {
    if x.ncols() != 2 {
        return Err(BekkError::WrongShape(x.ncols()));
    }
    let t = x.nrows();
    if t < MIN_OBSERVATIONS {
        return Err(BekkError::TooShort {
            needed: MIN_OBSERVATIONS,
            got: t,
        });
    }
    let raw = rows_of(x);
    if raw.iter().any(|r| !r[0].is_finite() || !r[1].is_finite()) {
        return Err(BekkError::NonFinite);
    }
    let scaling = Scaling::of(&raw);
    for k in 0..2 {
        if !(scaling.sd[k] > 1e-12 * scaling.mean[k].abs().max(1.0)) {
            return Err(BekkError::DegenerateSeries(k));
        }
    }
    let y = scaling.apply(&raw);
    let start = initial_values(&y).ok_or(BekkError::DegenerateSeries(0))?;

    let bfgs = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        ..BfgsOptions::default()
    };
    let first = optim::minimize(objective(&y, opts.gradient), &start, &bfgs)
        .ok_or(BekkError::InfeasibleStart)?;
    let mut best = first;
    let mut restarted = false;
    let mut iterations = best.iterations;
    if !best.converged {
        restarted = true;
        let retry_start = perturb(&start, opts.seed);
        if let Some(second) = optim::minimize(objective(&y, opts.gradient), &retry_start, &bfgs) {
            iterations += second.iterations;
            if second.converged || second.f < best.f {
                best = second;
            }
        }
    }

    let theta_std = best.x.clone();
    let signs = canonical_signs(&theta_std);
    let theta_std: Vec<f64> = theta_std.iter().zip(&signs).map(|(v, s)| v * s).collect();

    let jac = scaling.jacobian();
    let param_cov = covariance(&theta_std, &y, opts.robust).map(|v| &jac * v * jac.transpose());
    let theta_raw = scaling.to_raw(&theta_std);
    let params = BekkParams::from_slice(&theta_raw);
    let loglik = evaluate(&theta_raw, &raw, Want::Value)
        .map(|e| e.loglik)
        .ok_or(BekkError::InfeasibleStart)?;
    let persistence = params.persistence();

    Ok(BekkFit {
        params,
        loglik,
        param_cov,
        converged: best.converged,
        iterations,
        gradient_norm: best.grad_norm,
        restarted,
        persistence,
        stationary: persistence < 1.0,
        n_obs: t - 1,
    })
}
