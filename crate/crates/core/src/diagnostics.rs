//! Descriptive statistics and the per-series hypothesis tests reported in
//! the `describe` table: Jarque-Bera, Ljung-Box, Engle's ARCH-LM and the
//! augmented Dickey-Fuller unit-root test. Welch's two-sample t test is
//! provided for comparing auxiliary series between periods.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::stats::{central_moments, chi2_sf, mean, normal_cdf, ols, student_t_two_sided};

/// Lag count used by the Ljung-Box and ARCH-LM columns.
pub const DEFAULT_LAGS: usize = 20;
/// Largest augmentation order searched by the ADF lag selection.
pub const ADF_MAX_LAG: usize = 10;
/// Significance level used to mark rejections in reports.
pub const REPORT_LEVEL: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series is constant")]
    ConstantSeries,
    #[error("auxiliary regression is singular")]
    SingularRegression,
}

/// A test statistic with its p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub stat: f64,
    pub p: f64,
}

impl TestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p < level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdfResult {
    pub stat: f64,
    pub p: f64,
    /// Augmentation order picked by AIC.
    pub lag: usize,
}

/// One row of the descriptive table. Kurtosis is non-excess (normal = 3).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub jb_stat: f64,
    pub jb_p: f64,
    pub lb_stat: f64,
    pub lb_p: f64,
    pub arch_lm_stat: f64,
    pub arch_lm_p: f64,
    pub adf_stat: f64,
    pub adf_p: f64,
    pub adf_lag: usize,
}

fn require(len: usize, needed: usize) -> Result<(), DiagnosticsError> {
    if len < needed {
        Err(DiagnosticsError::SeriesTooShort { needed, got: len })
    } else {
        Ok(())
    }
}

/// Sample skewness and non-excess kurtosis from population moments.
pub fn skew_kurtosis(series: &[f64]) -> Result<(f64, f64), DiagnosticsError> {
    let (m2, m3, m4) = central_moments(series);
    if m2 <= 0.0 {
        return Err(DiagnosticsError::ConstantSeries);
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

pub fn jarque_bera(series: &[f64]) -> Result<TestResult, DiagnosticsError> {
    require(series.len(), 8)?;
    let (s, k) = skew_kurtosis(series)?;
    let n = series.len() as f64;
    let stat = n / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
    Ok(TestResult {
        stat,
        p: chi2_sf(stat, 2.0),
    })
}

/// Sample autocorrelations at lags `1..=lags`.
pub fn autocorrelations(series: &[f64], lags: usize) -> Result<Vec<f64>, DiagnosticsError> {
    let m = mean(series);
    let dev: Vec<f64> = series.iter().map(|v| v - m).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom <= 0.0 {
        return Err(DiagnosticsError::ConstantSeries);
    }
    Ok((1..=lags)
        .map(|k| {
            dev[k..]
                .iter()
                .zip(&dev[..dev.len() - k])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

pub fn ljung_box(series: &[f64], lags: usize) -> Result<TestResult, DiagnosticsError> {
    require(series.len(), lags + 1)?;
    let n = series.len() as f64;
    let rho = autocorrelations(series, lags)?;
    let stat = n
        * (n + 2.0)
        * rho
            .iter()
            .enumerate()
            .map(|(k, r)| r * r / (n - (k + 1) as f64))
            .sum::<f64>();
    Ok(TestResult {
        stat,
        p: chi2_sf(stat, lags as f64),
    })
}

/// Engle's LM test: `n R^2` from regressing the squared demeaned series on
/// a constant and its own `lags` lags, `n` being the regression sample size.
pub fn arch_lm(series: &[f64], lags: usize) -> Result<TestResult, DiagnosticsError> {
    require(series.len(), 2 * lags + 1)?;
    let m = mean(series);
    let sq: Vec<f64> = series.iter().map(|v| (v - m).powi(2)).collect();
    let rows = sq.len() - lags;
    let y = DVector::from_fn(rows, |r, _| sq[r + lags]);
    let x = DMatrix::from_fn(rows, lags + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            sq[r + lags - c]
        }
    });
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    if sst <= f64::EPSILON * ybar.abs().max(1e-300) * rows as f64 {
        return Err(DiagnosticsError::SingularRegression);
    }
    let fit = ols(&y, &x).ok_or(DiagnosticsError::SingularRegression)?;
    let r2 = (1.0 - fit.ssr / sst).clamp(0.0, 1.0);
    let stat = rows as f64 * r2;
    Ok(TestResult {
        stat,
        p: chi2_sf(stat, lags as f64),
    })
}

/// Builds the ADF regression `dy_t = a + g*y_{t-1} + sum_i d_i*dy_{t-i}`
/// over rows `first..` of the differenced series.
fn adf_design(y: &[f64], dy: &[f64], lag: usize, first: usize) -> (DVector<f64>, DMatrix<f64>) {
    let rows = dy.len() - first;
    let target = DVector::from_fn(rows, |r, _| dy[first + r]);
    let design = DMatrix::from_fn(rows, 2 + lag, |r, c| {
        let t = first + r;
        match c {
            0 => 1.0,
            1 => y[t],
            _ => dy[t - (c - 1)],
        }
    });
    (target, design)
}

/// Augmented Dickey-Fuller test with intercept and no trend. The lag order
/// is chosen by AIC over `0..=10` on a common sample, then the regression is
/// re-estimated on the longest sample the chosen order allows.
pub fn adf_test(series: &[f64]) -> Result<AdfResult, DiagnosticsError> {
    require(series.len(), 50)?;
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let max_lag = ADF_MAX_LAG.min((dy.len() - 4) / 2);

    let mut best = None;
    for lag in 0..=max_lag {
        let (target, design) = adf_design(series, &dy, lag, max_lag);
        let Some(fit) = ols(&target, &design) else {
            continue;
        };
        let n = target.len() as f64;
        let aic = n * (fit.ssr / n).ln() + 2.0 * (lag + 2) as f64;
        if best.is_none_or(|(_, b)| aic < b) {
            best = Some((lag, aic));
        }
    }
    let (lag, _) = best.ok_or(DiagnosticsError::SingularRegression)?;
    let (target, design) = adf_design(series, &dy, lag, lag);
    let fit = ols(&target, &design).ok_or(DiagnosticsError::SingularRegression)?;
    let se = fit.std_err(1);
    if !(se > 0.0) {
        return Err(DiagnosticsError::SingularRegression);
    }
    let stat = fit.coef[1] / se;
    Ok(AdfResult {
        stat,
        p: mackinnon_p_constant(stat),
        lag,
    })
}

/// MacKinnon (1994) response-surface p-value for the intercept-only
/// Dickey-Fuller tau statistic with a single series.
pub fn mackinnon_p_constant(tau: f64) -> f64 {
    const TAU_MAX: f64 = 2.74;
    const TAU_MIN: f64 = -18.83;
    const TAU_STAR: f64 = -1.61;
    const SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
    const LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];
    if tau.is_nan() {
        return f64::NAN;
    }
    if tau > TAU_MAX {
        return 1.0;
    }
    if tau < TAU_MIN {
        return 0.0;
    }
    let coef: &[f64] = if tau <= TAU_STAR { &SMALL_P } else { &LARGE_P };
    let z = coef.iter().rev().fold(0.0, |acc, c| acc * tau + c);
    normal_cdf(z)
}

/// Welch's unequal-variance t test with Welch-Satterthwaite degrees of freedom.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<TestResult, DiagnosticsError> {
    require(a.len().min(b.len()), 3)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (nb - 1.0);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TestResult { stat: 0.0, p: 1.0 }
        } else {
            TestResult {
                stat: diff.signum() * f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let stat = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult {
        stat,
        p: student_t_two_sided(stat, df),
    })
}

/// Every column of the descriptive table for one series.
pub fn describe(series: &[f64]) -> Result<SeriesDiagnostics, DiagnosticsError> {
    require(series.len(), 50)?;
    let m = mean(series);
    let n = series.len() as f64;
    let var = series.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let (skewness, kurtosis) = skew_kurtosis(series)?;
    let jb = jarque_bera(series)?;
    let lb = ljung_box(series, DEFAULT_LAGS)?;
    let arch = arch_lm(series, DEFAULT_LAGS)?;
    let adf = adf_test(series)?;
    Ok(SeriesDiagnostics {
        mean: m,
        std_dev: var.sqrt(),
        skewness,
        kurtosis,
        jb_stat: jb.stat,
        jb_p: jb.p,
        lb_stat: lb.stat,
        lb_p: lb.p,
        arch_lm_stat: arch.stat,
        arch_lm_p: arch.p,
        adf_stat: adf.stat,
        adf_p: adf.p,
        adf_lag: adf.lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn jb_zero_for_symmetric_mesokurtic_sample() {
        let mut x = vec![0.0; 8];
        x.extend([-1.0, -1.0, 1.0, 1.0]);
        let (s, k) = skew_kurtosis(&x).unwrap();
        assert!(s.abs() < 1e-15);
        assert!((k - 3.0).abs() < 1e-12);
        assert!(jarque_bera(&x).unwrap().stat < 1e-10);
    }

    #[test]
    fn jb_rejects_chi_square_sample() {
        let mut rejections = 0;
        for seed in 0..20 {
            let z = normals(seed, 500);
            let x: Vec<f64> = z.iter().map(|v| v * v).collect();
            if jarque_bera(&x).unwrap().p < 0.01 {
                rejections += 1;
            }
        }
        assert_eq!(rejections, 20);
    }

    #[test]
    fn jb_accepts_normal_sample_mostly() {
        let accepted = (0..200)
            .filter(|&s| jarque_bera(&normals(1000 + s, 10_000)).unwrap().p > 0.05)
            .count();
        assert!(accepted >= 186, "accepted {accepted}/200");
    }

    #[test]
    fn short_series_errors() {
        assert_eq!(
            jarque_bera(&[1.0; 5]),
            Err(DiagnosticsError::SeriesTooShort { needed: 8, got: 5 })
        );
        assert!(matches!(
            ljung_box(&[1.0, 2.0, 3.0], 20),
            Err(DiagnosticsError::SeriesTooShort { .. })
        ));
        assert!(matches!(
            adf_test(&[1.0; 49]),
            Err(DiagnosticsError::SeriesTooShort { .. })
        ));
        assert!(matches!(
            two_sample_t(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(DiagnosticsError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn ljung_box_size_and_power() {
        let rejections = (0..500)
            .filter(|&s| ljung_box(&normals(s, 2000), 20).unwrap().p < 0.05)
            .count();
        let rate = rejections as f64 / 500.0;
        assert!((rate - 0.05).abs() <= 0.02, "rate {rate}");

        for seed in 0..20 {
            let z = normals(7000 + seed, 500);
            let mut x = vec![0.0; 500];
            for t in 1..500 {
                x[t] = 0.8 * x[t - 1] + z[t];
            }
            assert!(ljung_box(&x, 20).unwrap().p < 0.01);
        }
    }

    #[test]
    fn ljung_box_near_zero_for_alternating_blocks() {
        // Walsh-like sequence: +1,+1,-1,-1 repeated has rho_1 = 0 but not
        // higher lags; use a single lag to check the orthogonal case.
        let x: Vec<f64> = (0..400)
            .map(|t| if (t / 2) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let r = ljung_box(&x, 1).unwrap();
        assert!(r.stat < 1e-2, "{}", r.stat);
    }

    #[test]
    fn arch_lm_size_power_and_degenerate() {
        let rej = (0..200)
            .filter(|&s| arch_lm(&normals(300 + s, 1000), 20).unwrap().p < 0.05)
            .count();
        let rate = rej as f64 / 200.0;
        assert!((rate - 0.05).abs() <= 0.035, "rate {rate}");

        let mut hits = 0;
        for seed in 0..40 {
            let z = normals(9000 + seed, 1500);
            let (omega, alpha, beta) = (0.05, 0.15, 0.8);
            let mut h = omega / (1.0 - alpha - beta);
            let mut x = Vec::with_capacity(1000);
            let mut prev = 0.0f64;
            for (t, zt) in z.iter().enumerate() {
                h = omega + alpha * prev * prev + beta * h;
                prev = h.sqrt() * zt;
                if t >= 500 {
                    x.push(prev);
                }
            }
            if arch_lm(&x, 20).unwrap().p < 0.01 {
                hits += 1;
            }
        }
        assert!(hits >= 38, "hits {hits}/40");

        assert_eq!(
            arch_lm(&[3.0; 100], 20),
            Err(DiagnosticsError::SingularRegression)
        );
    }

    #[test]
    fn adf_separates_random_walk_and_noise() {
        let mut keep = 0;
        let mut reject = 0;
        for seed in 0..50 {
            let z = normals(500 + seed, 1000);
            let walk: Vec<f64> = z
                .iter()
                .scan(0.0, |s, v| {
                    *s += v;
                    Some(*s)
                })
                .collect();
            if adf_test(&walk).unwrap().p > 0.05 {
                keep += 1;
            }
            if adf_test(&normals(800 + seed, 1000)).unwrap().p < 0.05 {
                reject += 1;
            }
        }
        assert!(keep >= 45, "random walk kept {keep}/50");
        assert!(reject >= 48, "white noise rejected {reject}/50");
    }

    #[test]
    fn mackinnon_matches_critical_values() {
        // Asymptotic 5% and 1% critical values for the constant case.
        assert!((mackinnon_p_constant(-2.8621) - 0.05).abs() < 2e-3);
        assert!((mackinnon_p_constant(-3.4304) - 0.01).abs() < 1e-3);
        assert_eq!(mackinnon_p_constant(3.0), 1.0);
        assert_eq!(mackinnon_p_constant(-20.0), 0.0);
    }

    #[test]
    fn welch_t_examples() {
        let a = normals(1, 100);
        let r = two_sample_t(&a, &a).unwrap();
        assert_eq!((r.stat, r.p), (0.0, 1.0));

        for seed in 0..20 {
            let x = normals(seed * 2, 100);
            let y: Vec<f64> = normals(seed * 2 + 1, 100).iter().map(|v| v + 5.0).collect();
            assert!(two_sample_t(&x, &y).unwrap().p < 0.001);
        }

        let rej = (0..400)
            .filter(|&s| two_sample_t(&normals(s, 100), &normals(10_000 + s, 100)).unwrap().p < 0.05)
            .count();
        let rate = rej as f64 / 400.0;
        assert!((rate - 0.05).abs() < 0.025, "rate {rate}");
    }

    #[test]
    fn describe_fills_every_column() {
        let x = normals(42, 300);
        let d = describe(&x).unwrap();
        assert!(d.std_dev > 0.8 && d.std_dev < 1.2);
        assert!(d.kurtosis >= 1.0);
        for p in [d.jb_p, d.lb_p, d.arch_lm_p, d.adf_p] {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn p_values_fall_as_autocorrelation_grows() {
        let z = normals(77, 400);
        let mut last = f64::INFINITY;
        for phi in [0.0, 0.2, 0.4, 0.6] {
            let mut x = vec![0.0; z.len()];
            for t in 1..z.len() {
                x[t] = phi * x[t - 1] + z[t];
            }
            let stat = ljung_box(&x, 20).unwrap().stat;
            assert!(stat > 0.0);
            let p = ljung_box(&x, 20).unwrap().p;
            assert!(p <= last);
            last = p;
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn statistics_shift_and_scale_invariant(seed in 0u64..1000, shift in -50.0f64..50.0, scale in 0.1f64..20.0) {
                let x = normals(seed, 120);
                let y: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-7 * a.abs().max(1.0);
                prop_assert!(close(jarque_bera(&x).unwrap().stat, jarque_bera(&y).unwrap().stat));
                prop_assert!(close(ljung_box(&x, 20).unwrap().stat, ljung_box(&y, 20).unwrap().stat));
                prop_assert!(close(arch_lm(&x, 20).unwrap().stat, arch_lm(&y, 20).unwrap().stat));
                let z: Vec<f64> = x.iter().map(|v| v + shift).collect();
                prop_assert!(close(adf_test(&x).unwrap().stat, adf_test(&z).unwrap().stat));
            }
        }
    }
}
