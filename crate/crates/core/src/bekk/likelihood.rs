//! Gaussian log-likelihood of the bivariate VAR(1)-BEKK(1,1) model and its
//! exact gradient.
//!
//! With `n = T - 1` mean-equation residuals `e_1..e_n`,
//!
//! ```text
//! L = -n ln(2 pi) - 1/2 sum_t [ ln|H_t| + e_t' H_t^-1 e_t ]
//! ```
//!
//! `H_1` is the (uncentred) sample covariance of the residuals at the
//! current parameters, and later `H_t` follow the BEKK recursion. The
//! gradient is propagated through the recursion alongside `H_t`, including
//! the dependence of `H_1` on the mean parameters.

use nalgebra::{DMatrix, Matrix2};

use super::params::{idx, BekkParams, N_PARAMS};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Symmetric 2x2 matrix stored as `(s11, s12, s22)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sym {
    s11: f64,
    s12: f64,
    s22: f64,
}

impl Sym {
    fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    fn add(&self, o: &Sym) -> Sym {
        Sym {
            s11: self.s11 + o.s11,
            s12: self.s12 + o.s12,
            s22: self.s22 + o.s22,
        }
    }

    /// `u v' + v u'`
    fn outer_sym(u: [f64; 2], v: [f64; 2]) -> Sym {
        Sym {
            s11: 2.0 * u[0] * v[0],
            s12: u[0] * v[1] + u[1] * v[0],
            s22: 2.0 * u[1] * v[1],
        }
    }

    /// `B' X B` for the 2x2 loading matrix `b` (row-major).
    fn congruence(&self, b: &[f64; 4]) -> Sym {
        // Y = X B
        let y00 = self.s11 * b[0] + self.s12 * b[2];
        let y01 = self.s11 * b[1] + self.s12 * b[3];
        let y10 = self.s12 * b[0] + self.s22 * b[2];
        let y11 = self.s12 * b[1] + self.s22 * b[3];
        Sym {
            s11: b[0] * y00 + b[2] * y10,
            s12: b[0] * y01 + b[2] * y11,
            s22: b[1] * y01 + b[3] * y11,
        }
    }

    /// `q' X q`
    fn quad(&self, q: [f64; 2]) -> f64 {
        self.s11 * q[0] * q[0] + 2.0 * self.s12 * q[0] * q[1] + self.s22 * q[1] * q[1]
    }

    /// `tr(Y X)` for symmetric `Y`.
    fn trace_prod(&self, y: &Sym) -> f64 {
        self.s11 * y.s11 + 2.0 * self.s12 * y.s12 + self.s22 * y.s22
    }
}

/// What [`evaluate`] should compute besides the log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Want {
    Value,
    Gradient,
    /// Gradient plus per-observation score contributions.
    Scores,
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub loglik: f64,
    pub grad: Option<[f64; N_PARAMS]>,
    pub scores: Option<Vec<[f64; N_PARAMS]>>,
}

/// Converts a `T x 2` matrix into row pairs.
pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<[f64; 2]> {
    assert_eq!(x.ncols(), 2, "series matrix must have two columns");
    (0..x.nrows()).map(|r| [x[(r, 0)], x[(r, 1)]]).collect()
}

fn residuals(theta: &[f64], x: &[[f64; 2]]) -> Vec<[f64; 2]> {
    use idx::*;
    x.windows(2)
        .map(|w| {
            let (prev, cur) = (w[0], w[1]);
            [
                cur[0] - theta[MU1] - theta[PHI11] * prev[0] - theta[PHI12] * prev[1],
                cur[1] - theta[MU2] - theta[PHI21] * prev[0] - theta[PHI22] * prev[1],
            ]
        })
        .collect()
}

/// Derivative of a residual with respect to mean parameter `p` (`p < 6`),
/// given the lagged observation.
fn residual_partial(p: usize, prev: [f64; 2]) -> [f64; 2] {
    use idx::*;
    match p {
        MU1 => [-1.0, 0.0],
        MU2 => [0.0, -1.0],
        PHI11 => [-prev[0], 0.0],
        PHI12 => [-prev[1], 0.0],
        PHI21 => [0.0, -prev[0]],
        PHI22 => [0.0, -prev[1]],
        _ => [0.0, 0.0],
    }
}

const N_MEAN: usize = 6;

/// Log-likelihood (not negated) and optionally its gradient. Returns `None`
/// when some `H_t` is not positive definite or the value is not finite.
pub(crate) fn evaluate(theta: &[f64], x: &[[f64; 2]], want: Want) -> Option<Evaluation> {
    use idx::*;
    debug_assert_eq!(theta.len(), N_PARAMS);
    let n = x.len().checked_sub(1)?;
    if n == 0 {
        return None;
    }
    let grad_on = want != Want::Value;
    let eps = residuals(theta, x);
    let nf = n as f64;

    let mut h = Sym::default();
    let mut ebar = [0.0; 2];
    // w[l] = sum_t x_{t-1,l} e_t
    let mut w = [[0.0; 2]; 2];
    for (s, e) in eps.iter().enumerate() {
        h.s11 += e[0] * e[0];
        h.s12 += e[0] * e[1];
        h.s22 += e[1] * e[1];
        if grad_on {
            ebar[0] += e[0];
            ebar[1] += e[1];
            for l in 0..2 {
                w[l][0] += x[s][l] * e[0];
                w[l][1] += x[s][l] * e[1];
            }
        }
    }
    h.s11 /= nf;
    h.s12 /= nf;
    h.s22 /= nf;

    let a = [theta[A11], theta[A12], theta[A21], theta[A22]];
    let b = [theta[B11], theta[B12], theta[B21], theta[B22]];
    let (c11, c21, c22) = (theta[C11], theta[C21], theta[C22]);
    let cc = Sym {
        s11: c11 * c11 + c21 * c21,
        s12: c21 * c22,
        s22: c22 * c22,
    };

    let mut dh = [Sym::default(); N_PARAMS];
    if grad_on {
        // dS/dmu_k = -(e_k ebar' + ebar e_k') / n, likewise for phi_kl with w_l.
        let unit = |k: usize| if k == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
        let scaled = |s: Sym| Sym {
            s11: -s.s11 / nf,
            s12: -s.s12 / nf,
            s22: -s.s22 / nf,
        };
        dh[MU1] = scaled(Sym::outer_sym(unit(0), ebar));
        dh[MU2] = scaled(Sym::outer_sym(unit(1), ebar));
        dh[PHI11] = scaled(Sym::outer_sym(unit(0), w[0]));
        dh[PHI12] = scaled(Sym::outer_sym(unit(0), w[1]));
        dh[PHI21] = scaled(Sym::outer_sym(unit(1), w[0]));
        dh[PHI22] = scaled(Sym::outer_sym(unit(1), w[1]));
    }

    let mut loglik = 0.0;
    let mut grad = [0.0; N_PARAMS];
    let mut scores = if want == Want::Scores {
        Some(Vec::with_capacity(n))
    } else {
        None
    };

    for s in 0..n {
        if s > 0 {
            let u = eps[s - 1];
            // v = A'u
            let v = [a[0] * u[0] + a[2] * u[1], a[1] * u[0] + a[3] * u[1]];
            let arch = Sym {
                s11: v[0] * v[0],
                s12: v[0] * v[1],
                s22: v[1] * v[1],
            };
            let next = cc.add(&arch).add(&h.congruence(&b));
            if grad_on {
                // M = H_{t-1} B (old H)
                let m = [
                    [h.s11 * b[0] + h.s12 * b[2], h.s11 * b[1] + h.s12 * b[3]],
                    [h.s12 * b[0] + h.s22 * b[2], h.s12 * b[1] + h.s22 * b[3]],
                ];
                let prev = x[s - 1];
                for p in 0..N_PARAMS {
                    let carried = dh[p].congruence(&b);
                    let direct = match p {
                        0..=5 => {
                            let du = residual_partial(p, prev);
                            let dv = [a[0] * du[0] + a[2] * du[1], a[1] * du[0] + a[3] * du[1]];
                            Sym::outer_sym(dv, v)
                        }
                        C11 => Sym {
                            s11: 2.0 * c11,
                            s12: 0.0,
                            s22: 0.0,
                        },
                        C21 => Sym {
                            s11: 2.0 * c21,
                            s12: c22,
                            s22: 0.0,
                        },
                        C22 => Sym {
                            s11: 0.0,
                            s12: c21,
                            s22: 2.0 * c22,
                        },
                        A11..=A22 => {
                            let (k, l) = ((p - A11) / 2, (p - A11) % 2);
                            let dv = if l == 0 { [u[k], 0.0] } else { [0.0, u[k]] };
                            Sym::outer_sym(dv, v)
                        }
                        _ => {
                            let (k, l) = ((p - B11) / 2, (p - B11) % 2);
                            if l == 0 {
                                Sym {
                                    s11: 2.0 * m[k][0],
                                    s12: m[k][1],
                                    s22: 0.0,
                                }
                            } else {
                                Sym {
                                    s11: 0.0,
                                    s12: m[k][0],
                                    s22: 2.0 * m[k][1],
                                }
                            }
                        }
                    };
                    dh[p] = carried.add(&direct);
                }
            }
            h = next;
        }

        let det = h.det();
        if !(h.s11 > 0.0 && det > 0.0) || !det.is_finite() {
            return None;
        }
        let inv = Sym {
            s11: h.s22 / det,
            s12: -h.s12 / det,
            s22: h.s11 / det,
        };
        let e = eps[s];
        let q = [
            inv.s11 * e[0] + inv.s12 * e[1],
            inv.s12 * e[0] + inv.s22 * e[1],
        ];
        let quad = e[0] * q[0] + e[1] * q[1];
        loglik += -LN_2PI - 0.5 * (det.ln() + quad);

        if grad_on {
            let prev = x[s];
            let mut score = [0.0; N_PARAMS];
            for p in 0..N_PARAMS {
                let mut g = -0.5 * inv.trace_prod(&dh[p]) + 0.5 * dh[p].quad(q);
                if p < N_MEAN {
                    let de = residual_partial(p, prev);
                    g -= q[0] * de[0] + q[1] * de[1];
                }
                score[p] = g;
                grad[p] += g;
            }
            if let Some(sc) = scores.as_mut() {
                sc.push(score);
            }
        }
    }

    if !loglik.is_finite() {
        return None;
    }
    Some(Evaluation {
        loglik,
        grad: grad_on.then_some(grad),
        scores,
    })
}

/// Negative log-likelihood of `params` on the `T x 2` matrix `x`. Returns
/// `+inf` when a conditional covariance fails to be positive definite.
pub fn neg_loglik(params: &BekkParams, x: &DMatrix<f64>) -> f64 {
    evaluate(&params.to_vec(), &rows_of(x), Want::Value)
        .map(|e| -e.loglik)
        .unwrap_or(f64::INFINITY)
}

/// Exact gradient of [`neg_loglik`] in the flat parameter order of
/// [`BekkParams::to_vec`]; `None` where the likelihood is undefined.
pub fn neg_loglik_gradient(params: &BekkParams, x: &DMatrix<f64>) -> Option<Vec<f64>> {
    evaluate(&params.to_vec(), &rows_of(x), Want::Gradient)
        .and_then(|e| e.grad)
        .map(|g| g.iter().map(|v| -v).collect())
}

/// Conditional covariances `H_1..H_n` along the sample, or `None` if the
/// recursion leaves the positive-definite cone.
pub fn conditional_covariances(params: &BekkParams, x: &DMatrix<f64>) -> Option<Vec<Matrix2<f64>>> {
    let theta = params.to_vec();
    let rows = rows_of(x);
    let eps = residuals(&theta, &rows);
    let n = eps.len();
    if n == 0 {
        return None;
    }
    let mut s0 = Matrix2::zeros();
    for e in &eps {
        s0 += Matrix2::new(e[0] * e[0], e[0] * e[1], e[1] * e[0], e[1] * e[1]);
    }
    let mut h = s0 / n as f64;
    let cc = params.intercept();
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        if s > 0 {
            let u = nalgebra::Vector2::new(eps[s - 1][0], eps[s - 1][1]);
            let v = params.a.transpose() * u;
            h = cc + v * v.transpose() + params.b.transpose() * h * params.b;
        }
        if !(h[(0, 0)] > 0.0 && h.determinant() > 0.0) {
            return None;
        }
        out.push(h);
    }
    Some(out)
}
