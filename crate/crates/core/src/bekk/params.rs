use nalgebra::{Matrix2, Matrix4, Vector2};
use serde::{Deserialize, Serialize};

/// Number of free parameters in the bivariate model: 2 drifts, 4 VAR(1)
/// coefficients, 3 Cholesky-style constants and 4 + 4 ARCH/GARCH loadings.
pub const N_PARAMS: usize = 17;

/// Positions inside the flat parameter vector.
pub mod idx {
    pub const MU1: usize = 0;
    pub const MU2: usize = 1;
    pub const PHI11: usize = 2;
    pub const PHI12: usize = 3;
    pub const PHI21: usize = 4;
    pub const PHI22: usize = 5;
    pub const C11: usize = 6;
    pub const C21: usize = 7;
    pub const C22: usize = 8;
    pub const A11: usize = 9;
    pub const A12: usize = 10;
    pub const A21: usize = 11;
    pub const A22: usize = 12;
    pub const B11: usize = 13;
    pub const B12: usize = 14;
    pub const B21: usize = 15;
    pub const B22: usize = 16;
}

pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "mu1", "mu2", "phi11", "phi12", "phi21", "phi22", "c11", "c21", "c22", "a11", "a12", "a21",
    "a22", "b11", "b12", "b21", "b22",
];

/// Parameters of the bivariate VAR(1) mean with BEKK(1,1) variance:
///
/// ```text
/// x_t = mu + phi x_{t-1} + e_t
/// H_t = C'C + A' e_{t-1} e_{t-1}' A + B' H_{t-1} B
/// ```
///
/// `c` is lower triangular. In this orientation the `(1,2)` entries of `a`
/// and `b` carry shocks and volatility from series 1 into series 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BekkParams {
    pub mu: Vector2<f64>,
    pub phi: Matrix2<f64>,
    pub c: Matrix2<f64>,
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
}

impl BekkParams {
    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), N_PARAMS, "parameter vector must have 17 entries");
        use idx::*;
        Self {
            mu: Vector2::new(v[MU1], v[MU2]),
            phi: Matrix2::new(v[PHI11], v[PHI12], v[PHI21], v[PHI22]),
            c: Matrix2::new(v[C11], 0.0, v[C21], v[C22]),
            a: Matrix2::new(v[A11], v[A12], v[A21], v[A22]),
            b: Matrix2::new(v[B11], v[B12], v[B21], v[B22]),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.mu[0],
            self.mu[1],
            self.phi[(0, 0)],
            self.phi[(0, 1)],
            self.phi[(1, 0)],
            self.phi[(1, 1)],
            self.c[(0, 0)],
            self.c[(1, 0)],
            self.c[(1, 1)],
            self.a[(0, 0)],
            self.a[(0, 1)],
            self.a[(1, 0)],
            self.a[(1, 1)],
            self.b[(0, 0)],
            self.b[(0, 1)],
            self.b[(1, 0)],
            self.b[(1, 1)],
        ]
    }

    /// `C'C`, the constant part of the conditional covariance.
    pub fn intercept(&self) -> Matrix2<f64> {
        self.c.transpose() * self.c
    }

    /// Lower-triangular `C` with positive diagonal such that `C'C = m`.
    /// Returns `None` if `m` is not positive definite.
    pub fn c_from_intercept(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
        let m22 = m[(1, 1)];
        if !(m22 > 0.0) {
            return None;
        }
        let c22 = m22.sqrt();
        let c21 = m[(0, 1)] / c22;
        let rest = m[(0, 0)] - c21 * c21;
        if !(rest > 0.0) {
            return None;
        }
        Some(Matrix2::new(rest.sqrt(), 0.0, c21, c22))
    }

    /// Spectral radius of `A (x) A + B (x) B`; the variance recursion is
    /// covariance stationary iff this is below one.
    pub fn persistence(&self) -> f64 {
        let k = kron(&self.a, &self.a) + kron(&self.b, &self.b);
        spectral_radius4(&k)
    }

    pub fn is_stationary(&self) -> bool {
        self.persistence() < 1.0
    }

    /// Spectral radius of the VAR(1) coefficient matrix.
    pub fn mean_persistence(&self) -> f64 {
        self.phi
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Unconditional mean `(I - phi)^-1 mu`, if defined.
    pub fn unconditional_mean(&self) -> Option<Vector2<f64>> {
        (Matrix2::identity() - self.phi)
            .try_inverse()
            .map(|inv| inv * self.mu)
    }

    /// Unconditional covariance solving `H = C'C + A'HA + B'HB`.
    pub fn unconditional_covariance(&self) -> Option<Matrix2<f64>> {
        // vec(A'HA) = (A' (x) A') vec(H) with column-major vec.
        let at = self.a.transpose();
        let bt = self.b.transpose();
        let k = kron(&at, &at) + kron(&bt, &bt);
        let lhs = Matrix4::identity() - k;
        let cc = self.intercept();
        let rhs = nalgebra::Vector4::new(cc[(0, 0)], cc[(1, 0)], cc[(0, 1)], cc[(1, 1)]);
        let v = lhs.lu().solve(&rhs)?;
        let h = Matrix2::new(v[0], 0.5 * (v[2] + v[1]), 0.5 * (v[1] + v[2]), v[3]);
        if h[(0, 0)] > 0.0 && h.determinant() > 0.0 {
            Some(h)
        } else {
            None
        }
    }

    /// Sign-normalised copy: `c11, c22 > 0`, `a11 >= 0`, `b11 >= 0`.
    /// The likelihood is unchanged by these flips.
    pub fn canonical(&self) -> Self {
        let v = self.to_vec();
        let signs = canonical_signs(&v);
        let flipped: Vec<f64> = v.iter().zip(&signs).map(|(x, s)| x * s).collect();
        Self::from_slice(&flipped)
    }
}

/// Per-parameter sign multipliers that bring `v` to canonical form.
pub fn canonical_signs(v: &[f64]) -> [f64; N_PARAMS] {
    use idx::*;
    let mut s = [1.0; N_PARAMS];
    if v[C11] < 0.0 {
        s[C11] = -1.0;
    }
    if v[C22] < 0.0 {
        s[C21] = -1.0;
        s[C22] = -1.0;
    }
    if v[A11] < 0.0 {
        for k in A11..=A22 {
            s[k] = -1.0;
        }
    }
    if v[B11] < 0.0 {
        for k in B11..=B22 {
            s[k] = -1.0;
        }
    }
    s
}

pub(crate) fn kron(x: &Matrix2<f64>, y: &Matrix2<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| x[(r / 2, c / 2)] * y[(r % 2, c % 2)])
}

fn spectral_radius4(m: &Matrix4<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()))
}
