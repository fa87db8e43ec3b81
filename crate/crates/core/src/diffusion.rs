//! Local spillover indices, their cumulative distributions, and the
//! pattern shift `S` and resilience `R` between periods.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::SpilloverNetwork;

pub const DEFAULT_BINS: usize = 10;

/// Grid size for integrating parametric curves.
const TRAPEZOID_POINTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("need at least 2 defined indices, got {0}")]
    TooFewNodes(usize),
    #[error("curve domains [{a_lo}, {a_hi}] and [{b_lo}, {b_hi}] do not overlap")]
    DisjointDomains {
        a_lo: f64,
        a_hi: f64,
        b_lo: f64,
        b_hi: f64,
    },
    #[error("lockdown pattern shift is zero; resilience undefined")]
    ZeroLockdownShift,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("bin count must be positive")]
    ZeroBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    Out,
    In,
}

/// Row sums (`d_out`) and column sums (`d_in`) of the weight matrix.
pub fn spillover_strengths(net: &SpilloverNetwork) -> (Vec<f64>, Vec<f64>) {
    let w = net.weights();
    let n = net.n_nodes();
    let d_out = (0..n).map(|i| w.row(i).sum()).collect();
    let d_in = (0..n).map(|j| w.column(j).sum()).collect();
    (d_out, d_in)
}

/// Own strength over the summed strength of the node's neighbours, where
/// neighbours are linked by an edge in either direction. `None` when that
/// sum is zero (including isolated nodes).
pub fn local_spillover_index(net: &SpilloverNetwork, direction: FlowDirection) -> Vec<Option<f64>> {
    let (d_out, d_in) = spillover_strengths(net);
    let d = match direction {
        FlowDirection::Out => d_out,
        FlowDirection::In => d_in,
    };
    let n = net.n_nodes();
    (0..n)
        .map(|i| {
            let denom: f64 = (0..n)
                .filter(|&j| j != i && (net.has_edge(i, j) || net.has_edge(j, i)))
                .map(|j| d[j])
                .sum();
            (denom > 0.0).then(|| d[i] / denom)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionProfile {
    pub node_ids: Vec<String>,
    pub out_strength: Vec<f64>,
    pub in_strength: Vec<f64>,
    pub local_out: Vec<Option<f64>>,
    pub local_in: Vec<Option<f64>>,
}

impl DiffusionProfile {
    pub fn of(net: &SpilloverNetwork) -> Self {
        let (out_strength, in_strength) = spillover_strengths(net);
        Self {
            node_ids: net.node_ids().to_vec(),
            out_strength,
            in_strength,
            local_out: local_spillover_index(net, FlowDirection::Out),
            local_in: local_spillover_index(net, FlowDirection::In),
        }
    }

    /// Defined local indices for one direction.
    pub fn defined(&self, direction: FlowDirection) -> Vec<f64> {
        let v = match direction {
            FlowDirection::Out => &self.local_out,
            FlowDirection::In => &self.local_in,
        };
        v.iter().flatten().copied().collect()
    }

    /// `node,d_out,d_in,ld_out,ld_in`; undefined indices are left empty.
    pub fn to_csv(&self) -> String {
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut s = String::from("node,d_out,d_in,ld_out,ld_in\n");
        for k in 0..self.node_ids.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                self.node_ids[k],
                self.out_strength[k],
                self.in_strength[k],
                cell(self.local_out[k]),
                cell(self.local_in[k])
            );
        }
        s
    }
}

/// Points `(x, y)` with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    pub bin_midpoints: Vec<f64>,
    pub cumulative_proportion: Vec<f64>,
}

impl CumulativeCurve {
    pub fn new(bin_midpoints: Vec<f64>, cumulative_proportion: Vec<f64>) -> Result<Self, DiffusionError> {
        if bin_midpoints.is_empty() || bin_midpoints.len() != cumulative_proportion.len() {
            return Err(DiffusionError::InvalidCurve(format!(
                "{} x values, {} y values",
                bin_midpoints.len(),
                cumulative_proportion.len()
            )));
        }
        if bin_midpoints.iter().chain(&cumulative_proportion).any(|v| !v.is_finite()) {
            return Err(DiffusionError::InvalidCurve("non-finite value".into()));
        }
        if bin_midpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DiffusionError::InvalidCurve("x must be strictly increasing".into()));
        }
        Ok(Self {
            bin_midpoints,
            cumulative_proportion,
        })
    }

    pub fn len(&self) -> usize {
        self.bin_midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_midpoints.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.bin_midpoints[0], *self.bin_midpoints.last().unwrap())
    }

    /// Linear interpolation; clamps outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let xs = &self.bin_midpoints;
        let ys = &self.cumulative_proportion;
        if x <= xs[0] {
            return ys[0];
        }
        if x >= xs[xs.len() - 1] {
            return ys[ys.len() - 1];
        }
        let k = xs.partition_point(|v| *v <= x) - 1;
        let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
        ys[k] + t * (ys[k + 1] - ys[k])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for (x, y) in self.bin_midpoints.iter().zip(&self.cumulative_proportion) {
            let _ = writeln!(s, "{x},{y}");
        }
        s
    }
}

/// Equal-width bins over `[min, max]`; `y_k` is the fraction of values at
/// or below the right edge of bin `k`, plotted at the bin midpoint. When all
/// values coincide the curve is the single point `(value, 1)`.
pub fn cumulative_distribution(indices: &[f64], bins: usize) -> Result<CumulativeCurve, DiffusionError> {
    if bins == 0 {
        return Err(DiffusionError::ZeroBins);
    }
    if indices.len() < 2 {
        return Err(DiffusionError::TooFewNodes(indices.len()));
    }
    if indices.iter().any(|v| !v.is_finite()) {
        return Err(DiffusionError::InvalidCurve("non-finite index".into()));
    }
    let lo = indices.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = indices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return CumulativeCurve::new(vec![lo], vec![1.0]);
    }
    let n = indices.len() as f64;
    let span = hi - lo;
    let mut xs = Vec::with_capacity(bins);
    let mut ys = Vec::with_capacity(bins);
    for k in 0..bins {
        let right = if k + 1 == bins {
            hi
        } else {
            lo + span * (k + 1) as f64 / bins as f64
        };
        let count = indices.iter().filter(|v| **v <= right).count();
        xs.push(lo + span * (k as f64 + 0.5) / bins as f64);
        ys.push(count as f64 / n);
    }
    CumulativeCurve::new(xs, ys)
}

/// How a cumulative curve is turned into a function before integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveModel {
    /// Piecewise-linear interpolation through the points.
    #[default]
    Linear,
    /// Least-squares fit of `y = 1 - c exp(-k x)` on `ln(1 - y)`.
    Exponential,
}

fn overlap(a: &CumulativeCurve, b: &CumulativeCurve) -> Result<(f64, f64), DiffusionError> {
    let (a_lo, a_hi) = a.domain();
    let (b_lo, b_hi) = b.domain();
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(DiffusionError::DisjointDomains { a_lo, a_hi, b_lo, b_hi })
    }
}

/// `S = integral of |F_a - F_b|` over the shared x-domain, with the
/// piecewise-linear interpolants integrated exactly.
pub fn pattern_shift(a: &CumulativeCurve, b: &CumulativeCurve) -> Result<f64, DiffusionError> {
    let (lo, hi) = overlap(a, b)?;
    let mut knots: Vec<f64> = a
        .bin_midpoints
        .iter()
        .chain(&b.bin_midpoints)
        .copied()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    for w in knots.windows(2) {
        let h = w[1] - w[0];
        let d0 = a.eval(w[0]) - b.eval(w[0]);
        let d1 = a.eval(w[1]) - b.eval(w[1]);
        total += if d0 * d1 >= 0.0 {
            0.5 * (d0.abs() + d1.abs()) * h
        } else {
            // the difference is linear on the segment and changes sign
            0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs()) * h
        };
    }
    Ok(total)
}

/// Parameters `(c, k)` of `1 - c exp(-k x)`, or `None` with fewer than two
/// usable points.
pub fn fit_exponential(curve: &CumulativeCurve) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .bin_midpoints
        .iter()
        .zip(&curve.cumulative_proportion)
        .filter(|(_, y)| **y < 1.0)
        .map(|(x, y)| (*x, (1.0 - y).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(((my - slope * mx).exp(), -slope))
}

/// Pattern shift under a chosen curve model. The exponential model uses a
/// composite trapezoid on 1000 points and falls back to interpolation for a
/// curve that cannot be fitted.
pub fn pattern_shift_with(
    a: &CumulativeCurve,
    b: &CumulativeCurve,
    model: CurveModel,
) -> Result<f64, DiffusionError> {
    match model {
        CurveModel::Linear => pattern_shift(a, b),
        CurveModel::Exponential => {
            let (lo, hi) = overlap(a, b)?;
            let model_of = |c: &CumulativeCurve| -> Box<dyn Fn(f64) -> f64> {
                match fit_exponential(c) {
                    Some((cc, k)) => Box::new(move |x| 1.0 - cc * (-k * x).exp()),
                    None => {
                        let c = c.clone();
                        Box::new(move |x| c.eval(x))
                    }
                }
            };
            let (fa, fb) = (model_of(a), model_of(b));
            let h = (hi - lo) / (TRAPEZOID_POINTS - 1) as f64;
            let g = |k: usize| {
                let x = if k + 1 == TRAPEZOID_POINTS { hi } else { lo + h * k as f64 };
                (fa(x) - fb(x)).abs()
            };
            let inner: f64 = (1..TRAPEZOID_POINTS - 1).map(g).sum();
            Ok(h * (0.5 * (g(0) + g(TRAPEZOID_POINTS - 1)) + inner))
        }
    }
}

/// `R = (S_recovery - S_lockdown) / S_lockdown`.
pub fn resilience(s_lockdown: f64, s_recovery: f64) -> Result<f64, DiffusionError> {
    if !(s_lockdown > 0.0) {
        return Err(DiffusionError::ZeroLockdownShift);
    }
    Ok((s_recovery - s_lockdown) / s_lockdown)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternShift {
    pub s_lockdown: f64,
    pub s_recovery: f64,
    /// `None` when `s_lockdown` is zero.
    pub resilience: Option<f64>,
}

impl PatternShift {
    /// Compares each pandemic-period curve with its normal-year counterpart.
    pub fn compute(
        lockdown: &CumulativeCurve,
        normal_lockdown: &CumulativeCurve,
        recovery: &CumulativeCurve,
        normal_recovery: &CumulativeCurve,
        model: CurveModel,
    ) -> Result<Self, DiffusionError> {
        let s_lockdown = pattern_shift_with(lockdown, normal_lockdown, model)?;
        let s_recovery = pattern_shift_with(recovery, normal_recovery, model)?;
        Ok(Self {
            s_lockdown,
            s_recovery,
            resilience: resilience(s_lockdown, s_recovery).ok(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn curve(points: &[(f64, f64)]) -> CumulativeCurve {
        CumulativeCurve::new(points.iter().map(|p| p.0).collect(), points.iter().map(|p| p.1).collect()).unwrap()
    }

    #[test]
    fn strengths_are_row_and_column_sums() {
        let net = SpilloverNetwork::from_edges(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(spillover_strengths(&net), (vec![2.0, 3.0], vec![3.0, 2.0]));
        let empty = SpilloverNetwork::from_edges(3, &[]).unwrap();
        assert_eq!(spillover_strengths(&empty), (vec![0.0; 3], vec![0.0; 3]));
    }

    #[test]
    fn local_index_fixtures() {
        let cycle = SpilloverNetwork::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(local_spillover_index(&cycle, FlowDirection::Out), vec![Some(1.0), Some(1.0)]);

        let star = SpilloverNetwork::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(
            local_spillover_index(&star, FlowDirection::Out),
            vec![None, Some(0.0), Some(0.0), Some(0.0)]
        );
        // in-direction: hub receives nothing, each leaf's neighbour (hub) has d_in 0
        assert_eq!(local_spillover_index(&star, FlowDirection::In), vec![Some(0.0), None, None, None]);

        let edges: Vec<_> = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j, 0.7)))
            .collect();
        let complete = SpilloverNetwork::from_edges(3, &edges).unwrap();
        for v in local_spillover_index(&complete, FlowDirection::In) {
            assert!((v.unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn binning_examples() {
        let idx: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let c = cumulative_distribution(&idx, 10).unwrap();
        for (k, y) in c.cumulative_proportion.iter().enumerate() {
            assert!((y - (k + 1) as f64 / 10.0).abs() < 1e-12, "bin {k}: {y}");
        }
        assert!((c.bin_midpoints[0] - 0.145).abs() < 1e-12);
        let flat = cumulative_distribution(&[0.4, 0.4, 0.4], 10).unwrap();
        assert_eq!(flat.cumulative_proportion, vec![1.0]);
        assert_eq!(cumulative_distribution(&[0.4], 10), Err(DiffusionError::TooFewNodes(1)));
    }

    #[test]
    fn uniform_indices_give_diagonal_curve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let idx: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let c = cumulative_distribution(&idx, 10).unwrap();
        for (k, y) in c.cumulative_proportion.iter().enumerate() {
            assert!((y - (k + 1) as f64 / 10.0).abs() < 0.02);
        }
    }

    #[test]
    fn shift_examples() {
        let a = curve(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = curve(&[(0.0, 0.7), (1.0, 0.7)]);
        assert!((pattern_shift(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(pattern_shift(&a, &a).unwrap(), 0.0);
        // Crossing curves: (0,0)-(1,0.5)-(2,1) against (0,0.4)-(1,0.4)-(2,0.8)
        // differences -0.4, 0.1, 0.2; first segment crosses at x = 0.8:
        // 0.5*0.4*0.8 + 0.5*0.1*0.2 + 0.5*(0.1+0.2)*1 = 0.16 + 0.01 + 0.15
        let p = curve(&[(0.0, 0.0), (1.0, 0.5), (2.0, 1.0)]);
        let q = curve(&[(0.0, 0.4), (1.0, 0.4), (2.0, 0.8)]);
        assert!((pattern_shift(&p, &q).unwrap() - 0.32).abs() < 1e-12);
        let far = curve(&[(5.0, 0.1), (6.0, 1.0)]);
        assert!(matches!(pattern_shift(&p, &far), Err(DiffusionError::DisjointDomains { .. })));
    }

    #[test]
    fn exponential_model_fits_exact_exponential() {
        let xs: Vec<f64> = (0..10).map(|k| 0.1 * k as f64 + 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.9 * (-3.0 * x).exp()).collect();
        let c = CumulativeCurve::new(xs, ys).unwrap();
        let (cc, k) = fit_exponential(&c).unwrap();
        assert!((cc - 0.9).abs() < 1e-12 && (k - 3.0).abs() < 1e-12);
        let a = curve(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = curve(&[(0.0, 0.7), (1.0, 0.7)]);
        let s = pattern_shift_with(&a, &b, CurveModel::Exponential).unwrap();
        assert!((s - 0.2).abs() < 1e-12);
    }

    #[test]
    fn resilience_values() {
        assert!((resilience(0.002, 0.032).unwrap() - 15.0).abs() < 1e-12);
        assert!((resilience(0.011, 0.051).unwrap() - 3.636_363_636).abs() < 1e-6);
        assert_eq!(resilience(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(resilience(0.0, 0.1), Err(DiffusionError::ZeroLockdownShift));
    }

    #[test]
    fn profile_csv_marks_undefined() {
        let star = SpilloverNetwork::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0)]).unwrap();
        let csv = DiffusionProfile::of(&star).to_csv();
        assert_eq!(csv.lines().nth(1).unwrap(), "0,2,0,,0");
    }

    fn arb_weights() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (2usize..7).prop_flat_map(|n| (Just(n), proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..3.0], n * n)))
    }

    fn net_of(n: usize, v: &[f64], scale: f64) -> SpilloverNetwork {
        let mut w = DMatrix::from_row_slice(n, n, v) * scale;
        w.fill_diagonal(0.0);
        SpilloverNetwork::from_weights((0..n).map(|k| k.to_string()).collect(), w, 0.05).unwrap()
    }

    fn arb_curve() -> impl Strategy<Value = CumulativeCurve> {
        proptest::collection::vec(0.0f64..1.0, 2..8).prop_map(|mut ys| {
            ys.sort_by(f64::total_cmp);
            let n = ys.len();
            CumulativeCurve::new((0..n).map(|k| k as f64 / (n - 1) as f64).collect(), ys).unwrap()
        })
    }

    proptest! {
        #[test]
        fn strengths_share_total((n, v) in arb_weights()) {
            let net = net_of(n, &v, 1.0);
            let (o, i) = spillover_strengths(&net);
            let (so, si): (f64, f64) = (o.iter().sum(), i.iter().sum());
            prop_assert!((so - si).abs() <= 1e-12 * so.max(1.0));
        }

        #[test]
        fn local_indices_are_scale_invariant((n, v) in arb_weights(), scale in 0.001f64..1000.0) {
            let a = net_of(n, &v, 1.0);
            let b = net_of(n, &v, scale);
            for dir in [FlowDirection::Out, FlowDirection::In] {
                let (x, y) = (local_spillover_index(&a, dir), local_spillover_index(&b, dir));
                for (p, q) in x.iter().zip(&y) {
                    match (p, q) {
                        (Some(p), Some(q)) => prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0)),
                        (None, None) => {}
                        _ => prop_assert!(false, "definedness changed under scaling"),
                    }
                }
            }
        }

        #[test]
        fn shift_is_a_metric(a in arb_curve(), b in arb_curve(), c in arb_curve()) {
            let ab = pattern_shift(&a, &b).unwrap();
            let ba = pattern_shift(&b, &a).unwrap();
            let ac = pattern_shift(&a, &c).unwrap();
            let cb = pattern_shift(&c, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-14);
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }
}
