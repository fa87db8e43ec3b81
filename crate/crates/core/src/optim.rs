//! BFGS minimisation with a strong-Wolfe line search.
//!
//! The objective returns `None` for infeasible points (for example a
//! conditional covariance that stops being positive definite). The line
//! search treats those as `+inf` and backs off.

/// Stopping rules for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the Euclidean gradient norm drops below this.
    pub grad_tol: f64,
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// True when the search stopped because no acceptable step was found.
    pub line_search_failed: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    d0: f64,
    opts: BfgsOptions,
    evals: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Option<Point> {
        self.evals += 1;
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.dir)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        let (f, g) = (self.f)(&x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Point { x, f, g })
    }

    fn armijo_ok(&self, alpha: f64, f: f64) -> bool {
        f <= self.f0 + self.opts.c1 * alpha * self.d0
    }

    fn curvature_ok(&self, d: f64) -> bool {
        d.abs() <= -self.opts.c2 * self.d0
    }

    /// Returns an accepted point, or `None` if no step satisfying the Armijo
    /// condition could be found.
    fn search(&mut self, mut alpha: f64) -> Option<(f64, Point)> {
        let mut lo = Bracket {
            alpha: 0.0,
            f: self.f0,
            d: self.d0,
            point: None,
        };
        for i in 0..self.opts.max_line_search {
            let Some(p) = self.eval(alpha) else {
                return self.zoom(lo, alpha, None);
            };
            if !self.armijo_ok(alpha, p.f) || (i > 0 && p.f >= lo.f) {
                let f_hi = p.f;
                return self.zoom(lo, alpha, Some(f_hi));
            }
            let d = dot(&p.g, self.dir);
            if self.curvature_ok(d) {
                return Some((alpha, p));
            }
            let here = Bracket {
                alpha,
                f: p.f,
                d,
                point: Some(p),
            };
            if d >= 0.0 {
                let (hi, f_hi) = (lo.alpha, lo.f);
                return self.zoom(here, hi, Some(f_hi));
            }
            lo = here;
            alpha *= 2.0;
        }
        lo.point.map(|p| (lo.alpha, p))
    }

    /// Narrows `[lo, hi]` (in either order) until a strong-Wolfe point is
    /// found. `lo` always satisfies the Armijo condition.
    fn zoom(&mut self, mut lo: Bracket, mut hi: f64, mut f_hi: Option<f64>) -> Option<(f64, Point)> {
        for _ in 0..self.opts.max_line_search {
            let width = hi - lo.alpha;
            if width.abs() < 1e-14 * lo.alpha.abs().max(1e-8) {
                break;
            }
            // Minimiser of the quadratic through (lo, f_lo, d_lo) and (hi, f_hi),
            // kept away from the bracket ends.
            let mut alpha = lo.alpha + 0.5 * width;
            if let Some(fh) = f_hi {
                let denom = 2.0 * (fh - lo.f - lo.d * width);
                if denom > 0.0 {
                    let q = lo.alpha - lo.d * width * width / denom;
                    let t = (q - lo.alpha) / width;
                    if (0.1..=0.9).contains(&t) {
                        alpha = q;
                    }
                }
            }
            match self.eval(alpha) {
                Some(p) if self.armijo_ok(alpha, p.f) && p.f < lo.f => {
                    let d = dot(&p.g, self.dir);
                    if self.curvature_ok(d) {
                        return Some((alpha, p));
                    }
                    if d * (hi - lo.alpha) >= 0.0 {
                        hi = lo.alpha;
                        f_hi = Some(lo.f);
                    }
                    lo = Bracket {
                        alpha,
                        f: p.f,
                        d,
                        point: Some(p),
                    };
                }
                Some(p) => {
                    hi = alpha;
                    f_hi = Some(p.f);
                }
                None => {
                    hi = alpha;
                    f_hi = None;
                }
            }
        }
        // Accept the best sufficient-decrease point even if curvature failed.
        match lo.point {
            Some(p) if lo.alpha > 0.0 => Some((lo.alpha, p)),
            _ => None,
        }
    }
}

struct Bracket {
    alpha: f64,
    f: f64,
    d: f64,
    point: Option<Point>,
}

/// Minimises `f` from `x0` with BFGS on the inverse Hessian.
///
/// `f` returns the objective value and its gradient, or `None` when `x` is
/// infeasible. The starting point must be feasible.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (f0, g0) = f(x0)?;
    if !f0.is_finite() {
        return None;
    }
    let mut cur = Point {
        x: x0.to_vec(),
        f: f0,
        g: g0,
    };
    let mut evals = 1;
    let mut hinv = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut line_search_failed = false;

    while iterations < opts.max_iter {
        let gnorm = norm(&cur.g);
        if gnorm < opts.grad_tol {
            break;
        }
        let mut dir = mat_vec(&hinv, &cur.g);
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&dir, &cur.g);
        if !(slope < 0.0) {
            hinv = identity(n);
            fresh = true;
            dir = cur.g.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if fresh { (1.0 / norm(&dir)).min(1.0) } else { 1.0 };
        let mut ls = LineSearch {
            f: &mut f,
            x: &cur.x,
            dir: &dir,
            f0: cur.f,
            d0: slope,
            opts: *opts,
            evals: 0,
        };
        let found = ls.search(alpha0);
        evals += ls.evals;
        let Some((_, next)) = found else {
            if fresh {
                line_search_failed = true;
                break;
            }
            hinv = identity(n);
            fresh = true;
            continue;
        };
        iterations += 1;

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                let scale = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }
        cur = next;
    }

    let grad_norm = norm(&cur.g);
    Some(Minimum {
        converged: grad_norm < opts.grad_tol,
        grad_norm,
        x: cur.x,
        f: cur.f,
        grad: cur.g,
        iterations,
        evaluations: evals,
        line_search_failed,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Central-difference gradient; `None` if any probe is infeasible.
pub fn numerical_gradient<F>(f: &mut F, x: &[f64], rel_step: f64) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let fp = f(&probe)?;
        probe[i] = x[i] - h;
        let fm = f(&probe)?;
        probe[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Some((f, g))
    }

    #[test]
    fn solves_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default()).unwrap();
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum of (x-2)^2 restricted to x < 1.5 is approached from the left;
        // the infeasible half-line must never be accepted.
        let f = |x: &[f64]| {
            if x[0] >= 1.5 {
                None
            } else {
                Some(((x[0] - 2.0).powi(2) - (1.5 - x[0]).ln(), vec![2.0 * (x[0] - 2.0) + 1.0 / (1.5 - x[0])]))
            }
        };
        let m = minimize(f, &[0.0], &BfgsOptions::default()).unwrap();
        assert!(m.converged);
        assert!(m.x[0] < 1.5);
        // stationary point of (x-2)^2 - ln(1.5-x): 2(x-2)(1.5-x) = -1
        let x = m.x[0];
        assert!((2.0 * (x - 2.0) * (1.5 - x) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_many_dimensions() {
        let diag: Vec<f64> = (1..=17).map(|k| k as f64).collect();
        let f = |x: &[f64]| {
            let v = x.iter().zip(&diag).map(|(xi, d)| 0.5 * d * (xi - 1.0).powi(2)).sum();
            let g = x.iter().zip(&diag).map(|(xi, d)| d * (xi - 1.0)).collect();
            Some((v, g))
        };
        let m = minimize(f, &[0.0; 17], &BfgsOptions::default()).unwrap();
        assert!(m.converged);
        assert!(m.iterations < 60);
    }

    #[test]
    fn finite_difference_gradient() {
        let mut f = |x: &[f64]| Some(x[0].sin() * x[1].exp());
        let g = numerical_gradient(&mut f, &[0.3, -0.2], 1e-6).unwrap();
        assert!((g[0] - 0.3f64.cos() * (-0.2f64).exp()).abs() < 1e-8);
        assert!((g[1] - 0.3f64.sin() * (-0.2f64).exp()).abs() < 1e-8);
    }
}
