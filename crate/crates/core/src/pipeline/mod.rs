//! End-to-end run: load, describe, fit every pair, build the network, then
//! diffusion and block analysis per period, and the cross-period shift.
//!
//! [`analyze`] does the work without touching the file system and
//! [`write_report`] lays the results out as one directory per period with
//! fixed file names. Pair fits run on a dedicated thread pool; each pair's
//! seed depends only on the run seed and the pair's position, and results
//! are collected in node order, so output does not depend on `jobs`.

pub mod config;
pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use config::{ConfigError, RunConfig};

use crate::bekk::{fit_bekk, spillover_weight, wald_spillover, BekkError, BekkFit, Direction, FitOptions, MIN_OBSERVATIONS, PARAM_NAMES};
use crate::blockmodel::{block_model, BlockPartition};
use crate::diagnostics::{self, AdfResult, TestResult, DEFAULT_LAGS};
use crate::diffusion::{
    cumulative_distribution, pattern_shift_with, resilience, CumulativeCurve, CurveModel, DiffusionProfile,
    FlowDirection,
};
use crate::network::{build_network, NetworkTopology, SpilloverNetwork, SpilloverTest, TestStatus};
use crate::panel::{load_panel, PeriodSpec, SeriesPanel};

pub const LOCKDOWN: &str = "lockdown";
pub const RECOVERY: &str = "recovery";
pub const NORMAL_LOCKDOWN: &str = "normal-lockdown";
pub const NORMAL_RECOVERY: &str = "normal-recovery";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Describe,
    Estimate,
    Network,
    Diffusion,
    Blocks,
    Compare,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Describe => "describe",
            Stage::Estimate => "estimate",
            Stage::Network => "network",
            Stage::Diffusion => "diffusion",
            Stage::Blocks => "blocks",
            Stage::Compare => "compare",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

/// How far a run goes; each target includes the stages it depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Describe,
    Estimate,
    Network,
    Diffusion,
    Blocks,
    Pipeline,
}

impl Target {
    pub fn includes(self, stage: Stage) -> bool {
        use Stage as S;
        match stage {
            S::Load | S::Write => true,
            S::Describe => matches!(self, Target::Describe | Target::Pipeline),
            S::Estimate => self != Target::Describe,
            S::Network => !matches!(self, Target::Describe | Target::Estimate),
            S::Diffusion | S::Compare => matches!(self, Target::Diffusion | Target::Pipeline),
            S::Blocks => matches!(self, Target::Blocks | Target::Pipeline),
        }
    }
}

fn pair_label(pair: &Option<(String, String)>) -> String {
    pair.as_ref().map(|(a, b)| format!(" [{a}, {b}]")).unwrap_or_default()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage, period {period:?}{}: {message}", pair_label(.pair))]
    Data {
        stage: Stage,
        period: Option<String>,
        pair: Option<(String, String)>,
        message: String,
    },
    #[error("{stage} stage, period {period:?}{}: {message}", pair_label(.pair))]
    Estimation {
        stage: Stage,
        period: Option<String>,
        pair: Option<(String, String)>,
        message: String,
    },
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

impl PipelineError {
    /// Process exit status: 1 configuration, 2 data, 3 estimation.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Data { .. } | PipelineError::Io { .. } => 2,
            PipelineError::Estimation { .. } => 3,
        }
    }

    fn data(stage: Stage, period: Option<&str>, message: impl ToString) -> Self {
        PipelineError::Data {
            stage,
            period: period.map(str::to_string),
            pair: None,
            message: message.to_string(),
        }
    }
}

/// Diagnostics for one node; tests that cannot run on the sample are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescribeRow {
    pub node: String,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub jarque_bera: Option<TestResult>,
    pub ljung_box: Option<TestResult>,
    pub arch_lm: Option<TestResult>,
    pub adf: Option<AdfResult>,
}

pub fn describe_panel(panel: &SeriesPanel) -> Vec<DescribeRow> {
    (0..panel.n_nodes())
        .map(|j| {
            let x = panel.column(j);
            let n = x.len();
            let mean = crate::stats::mean(&x);
            let std_dev = if n > 1 {
                (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            let sk = diagnostics::skew_kurtosis(&x).ok();
            DescribeRow {
                node: panel.node_ids()[j].clone(),
                n,
                mean,
                std_dev,
                skewness: sk.map(|v| v.0),
                kurtosis: sk.map(|v| v.1),
                jarque_bera: diagnostics::jarque_bera(&x).ok(),
                ljung_box: diagnostics::ljung_box(&x, DEFAULT_LAGS).ok(),
                arch_lm: diagnostics::arch_lm(&x, DEFAULT_LAGS).ok(),
                adf: diagnostics::adf_test(&x).ok(),
            }
        })
        .collect()
}

fn describe_csv(rows: &[DescribeRow]) -> String {
    fn o(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut s = String::from(
        "node,n,mean,std_dev,skewness,kurtosis,jb_stat,jb_p,lb_stat,lb_p,arch_lm_stat,arch_lm_p,adf_stat,adf_p,adf_lag\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.node,
            r.n,
            r.mean,
            r.std_dev,
            o(r.skewness),
            o(r.kurtosis),
            o(r.jarque_bera.map(|t| t.stat)),
            o(r.jarque_bera.map(|t| t.p)),
            o(r.ljung_box.map(|t| t.stat)),
            o(r.ljung_box.map(|t| t.p)),
            o(r.arch_lm.map(|t| t.stat)),
            o(r.arch_lm.map(|t| t.p)),
            o(r.adf.map(|t| t.stat)),
            o(r.adf.map(|t| t.p)),
            r.adf.map(|t| t.lag.to_string()).unwrap_or_default(),
        );
    }
    s
}

/// Fit of one unordered pair, column `first` against column `second`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFit {
    pub first: usize,
    pub second: usize,
    pub fit: BekkFit,
}

/// Unordered pairs `(i, j)`, `i < j`, in row-major order.
pub fn unordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn pair_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits every unordered pair on a pool of `jobs` threads. On failure the
/// first failing pair in node order is reported.
pub fn estimate_pairs(
    panel: &SeriesPanel,
    opts: &FitOptions,
    jobs: usize,
) -> Result<Vec<PairFit>, (usize, usize, BekkError)> {
    let pairs = unordered_pairs(panel.n_nodes());
    let work = |k: usize, (i, j): (usize, usize)| {
        let o = FitOptions {
            seed: pair_seed(opts.seed, k),
            ..*opts
        };
        fit_bekk(&panel.pair(i, j), &o)
            .map(|fit| PairFit { first: i, second: j, fit })
            .map_err(|e| (i, j, e))
    };
    let results: Vec<Result<PairFit, (usize, usize, BekkError)>> = if jobs <= 1 {
        pairs.iter().enumerate().map(|(k, p)| work(k, *p)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| pairs.par_iter().enumerate().map(|(k, p)| work(k, *p)).collect())
    };
    results.into_iter().collect()
}

fn directional_test(ids: &[String], from: usize, to: usize, fit: &BekkFit, dir: Direction) -> SpilloverTest {
    let (a_off, b_off, weight) = spillover_weight(fit, dir);
    let wald = wald_spillover(fit, dir).ok();
    let status = if !fit.converged {
        TestStatus::NotConverged
    } else if wald.is_some() {
        TestStatus::Tested
    } else {
        TestStatus::Untestable
    };
    SpilloverTest {
        from: ids[from].clone(),
        to: ids[to].clone(),
        a_off,
        b_off,
        weight,
        wald_stat: wald.map(|w| w.wald_stat),
        p_value: wald.map(|w| w.p_value),
        status,
    }
}

/// Both directional tests of every pair: `first -> second`, then back.
pub fn spillover_tests(ids: &[String], fits: &[PairFit]) -> Vec<SpilloverTest> {
    fits.iter()
        .flat_map(|p| {
            [
                directional_test(ids, p.first, p.second, &p.fit, Direction::FirstToSecond),
                directional_test(ids, p.second, p.first, &p.fit, Direction::SecondToFirst),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodResult {
    pub period: PeriodSpec,
    pub node_ids: Vec<String>,
    pub n_obs: usize,
    pub diagnostics: Option<Vec<DescribeRow>>,
    pub fits: Vec<PairFit>,
    pub tests: Vec<SpilloverTest>,
    pub network: Option<SpilloverNetwork>,
    pub diffusion: Option<DiffusionProfile>,
    pub curve_out: Option<CumulativeCurve>,
    pub curve_in: Option<CumulativeCurve>,
    pub blocks: Option<BlockPartition>,
}

impl PeriodResult {
    pub fn topology(&self) -> Option<NetworkTopology> {
        self.network.as_ref().map(SpilloverNetwork::topology)
    }
}

/// Shift of one direction's curves against the normal-year counterparts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionShift {
    pub s_lockdown: Option<f64>,
    pub s_recovery: Option<f64>,
    pub resilience: Option<f64>,
    /// Why a value is missing, if one is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    #[serde(rename = "out")]
    pub out_direction: DirectionShift,
    #[serde(rename = "in")]
    pub in_direction: DirectionShift,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("period {0:?} is required for the comparison")]
    MissingPeriod(&'static str),
}

fn shift_for(
    curves: [Option<&CumulativeCurve>; 4],
    model: CurveModel,
) -> DirectionShift {
    let [l, nl, r, nr] = curves;
    let s = |a: Option<&CumulativeCurve>, b: Option<&CumulativeCurve>| -> Result<f64, String> {
        match (a, b) {
            (Some(a), Some(b)) => pattern_shift_with(a, b, model).map_err(|e| e.to_string()),
            _ => Err("a cumulative curve is undefined (fewer than 2 defined indices)".into()),
        }
    };
    let (sl, sr) = (s(l, nl), s(r, nr));
    let mut notes = Vec::new();
    let resilience_value = match (&sl, &sr) {
        (Ok(a), Ok(b)) => match resilience(*a, *b) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        },
        _ => None,
    };
    for e in [&sl, &sr].into_iter().filter_map(|r| r.as_ref().err()) {
        notes.push(e.clone());
    }
    DirectionShift {
        s_lockdown: sl.ok(),
        s_recovery: sr.ok(),
        resilience: resilience_value,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

/// Pattern shift and resilience per direction from the four named periods.
pub fn compare_periods(periods: &[PeriodResult], model: CurveModel) -> Result<Comparison, CompareError> {
    let find = |name: &'static str| {
        periods
            .iter()
            .find(|p| p.period.name == name)
            .ok_or(CompareError::MissingPeriod(name))
    };
    let l = find(LOCKDOWN)?;
    let nl = find(NORMAL_LOCKDOWN)?;
    let r = find(RECOVERY)?;
    let nr = find(NORMAL_RECOVERY)?;
    let dir = |d| shift_for([pick(l, d), pick(nl, d), pick(r, d), pick(nr, d)], model);
    Ok(Comparison {
        out_direction: dir(FlowDirection::Out),
        in_direction: dir(FlowDirection::In),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub periods: Vec<PeriodResult>,
    pub comparison: Option<Comparison>,
}

/// Loads the configured input, applying differencing if requested.
pub fn load_input(config: &RunConfig) -> Result<SeriesPanel, PipelineError> {
    let file = std::fs::File::open(&config.input)
        .map_err(|e| PipelineError::data(Stage::Load, None, format!("{}: {e}", config.input.display())))?;
    let panel = load_panel(std::io::BufReader::new(file), &config.schema())
        .map_err(|e| PipelineError::data(Stage::Load, None, e))?;
    if config.difference {
        panel.first_difference().map_err(|e| PipelineError::data(Stage::Load, None, e))
    } else {
        Ok(panel)
    }
}

fn analyze_period(
    config: &RunConfig,
    panel: &SeriesPanel,
    spec: &PeriodSpec,
    target: Target,
) -> Result<PeriodResult, PipelineError> {
    let name = Some(spec.name.as_str());
    let slice = panel
        .slice_period(spec)
        .map_err(|e| PipelineError::data(Stage::Load, name, e))?;
    let ids = slice.node_ids().to_vec();
    let mut out = PeriodResult {
        period: spec.clone(),
        node_ids: ids.clone(),
        n_obs: slice.len(),
        diagnostics: None,
        fits: Vec::new(),
        tests: Vec::new(),
        network: None,
        diffusion: None,
        curve_out: None,
        curve_in: None,
        blocks: None,
    };
    if target.includes(Stage::Describe) {
        out.diagnostics = Some(describe_panel(&slice));
    }
    if !target.includes(Stage::Estimate) {
        return Ok(out);
    }
    if slice.len() < MIN_OBSERVATIONS {
        return Err(PipelineError::data(
            Stage::Estimate,
            name,
            format!("{} observations, need at least {MIN_OBSERVATIONS}", slice.len()),
        ));
    }
    info!("period {}: fitting {} pairs", spec.name, unordered_pairs(ids.len()).len());
    out.fits = estimate_pairs(&slice, &config.fit_options(), config.jobs).map_err(|(i, j, e)| {
        let pair = Some((ids[i].clone(), ids[j].clone()));
        let message = e.to_string();
        let period = Some(spec.name.clone());
        match e {
            BekkError::DegenerateSeries(_) | BekkError::NonFinite | BekkError::TooShort { .. } | BekkError::WrongShape(_) => {
                PipelineError::Data { stage: Stage::Estimate, period, pair, message }
            }
            _ => PipelineError::Estimation { stage: Stage::Estimate, period, pair, message },
        }
    })?;
    out.tests = spillover_tests(&ids, &out.fits);
    if !target.includes(Stage::Network) {
        return Ok(out);
    }
    let net = build_network(&out.tests, &ids, config.alpha).map_err(|e| PipelineError::Estimation {
        stage: Stage::Network,
        period: Some(spec.name.clone()),
        pair: None,
        message: e.to_string(),
    })?;
    if target.includes(Stage::Diffusion) {
        let profile = DiffusionProfile::of(&net);
        let curve = |d: FlowDirection| match cumulative_distribution(&profile.defined(d), config.bins) {
            Ok(c) => Some(c),
            Err(e) => {
                warn!("period {}: no {d:?} curve: {e}", spec.name);
                None
            }
        };
        out.curve_out = curve(FlowDirection::Out);
        out.curve_in = curve(FlowDirection::In);
        out.diffusion = Some(profile);
    }
    if target.includes(Stage::Blocks) {
        match block_model(&net, config.concor_depth, config.concor_convergence) {
            Ok(b) => {
                if b.degenerate {
                    warn!("period {}: CONCOR fell back to a split by node order", spec.name);
                }
                out.blocks = Some(b);
            }
            Err(e) => warn!("period {}: no block model: {e}", spec.name),
        }
    }
    out.network = Some(net);
    Ok(out)
}

/// Runs the requested stages on an already loaded panel.
pub fn analyze(config: &RunConfig, panel: &SeriesPanel, target: Target) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let periods = config
        .periods
        .iter()
        .map(|spec| analyze_period(config, panel, spec, target))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = if target.includes(Stage::Compare) {
        match compare_periods(&periods, config.curve_model) {
            Ok(c) => Some(c),
            Err(e) => {
                info!("no cross-period comparison: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(RunReport { periods, comparison })
}

#[derive(Serialize)]
struct ParamEstimate {
    name: &'static str,
    value: f64,
    std_error: Option<f64>,
}

#[derive(Serialize)]
struct FitRecord<'a> {
    first: &'a str,
    second: &'a str,
    converged: bool,
    restarted: bool,
    iterations: usize,
    gradient_norm: f64,
    loglik: f64,
    persistence: f64,
    stationary: bool,
    n_obs: usize,
    estimates: Vec<ParamEstimate>,
    tests: [&'a SpilloverTest; 2],
}

#[derive(Serialize)]
struct PeriodSummary<'a> {
    name: &'a str,
    start: String,
    end: String,
    n_obs: usize,
    n_nodes: usize,
    fits: usize,
    tests: usize,
    not_converged: usize,
    untestable: usize,
    topology: Option<NetworkTopology>,
    concor_degenerate: Option<bool>,
}

fn tests_csv(tests: &[SpilloverTest]) -> String {
    let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("from,to,a_off,b_off,weight,wald_stat,p_value,converged,status\n");
    for t in tests {
        let status = match t.status {
            TestStatus::Tested => "tested",
            TestStatus::Untestable => "untestable",
            TestStatus::NotConverged => "not-converged",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            t.from,
            t.to,
            t.a_off,
            t.b_off,
            t.weight,
            o(t.wald_stat),
            o(t.p_value),
            t.status != TestStatus::NotConverged,
            status
        );
    }
    s
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

struct Writer {
    root: PathBuf,
}

impl Writer {
    fn put(&self, rel: &str, contents: &str) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        let io = |e: std::io::Error| PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(&path, contents).map_err(io)
    }
}

fn write_period(w: &Writer, p: &PeriodResult) -> Result<(), PipelineError> {
    let dir = &p.period.name;
    let f = |name: &str| format!("{dir}/{name}");
    if let Some(rows) = &p.diagnostics {
        w.put(&f("describe.csv"), &describe_csv(rows))?;
    }
    if !p.fits.is_empty() {
        w.put(&f("estimates.csv"), &tests_csv(&p.tests))?;
        let records: Vec<FitRecord> = p
            .fits
            .iter()
            .zip(p.tests.chunks(2))
            .map(|(pf, t)| {
                let se = pf.fit.std_errors();
                FitRecord {
                    first: &p.node_ids[pf.first],
                    second: &p.node_ids[pf.second],
                    converged: pf.fit.converged,
                    restarted: pf.fit.restarted,
                    iterations: pf.fit.iterations,
                    gradient_norm: pf.fit.gradient_norm,
                    loglik: pf.fit.loglik,
                    persistence: pf.fit.persistence,
                    stationary: pf.fit.stationary,
                    n_obs: pf.fit.n_obs,
                    estimates: pf
                        .fit
                        .params
                        .to_vec()
                        .into_iter()
                        .enumerate()
                        .map(|(k, value)| ParamEstimate {
                            name: PARAM_NAMES[k],
                            value,
                            std_error: se.as_ref().map(|s| s[k]),
                        })
                        .collect(),
                    tests: [&t[0], &t[1]],
                }
            })
            .collect();
        w.put(&f("estimates.json"), &json(&records))?;
    }
    if let Some(net) = &p.network {
        w.put(&f("adjacency.csv"), &net.adjacency_csv())?;
        w.put(&f("network.dot"), &net.to_dot(dir))?;
        w.put(&f("topology.json"), &json(&net.topology()))?;
        let mut csv = String::from("x,y\n");
        if let Ok(curve) = net.weighted_edge_cumulative() {
            for (x, y) in &curve {
                let _ = writeln!(csv, "{x},{y}");
            }
            let svg = svg::line_chart(
                &format!("Cumulative weighted edges: {dir}"),
                "fraction of edges (heaviest first)",
                "share of total weight",
                &[(dir.as_str(), &curve)],
            );
            w.put(&f("edge_cumulative.svg"), &svg)?;
        }
        w.put(&f("edge_cumulative.csv"), &csv)?;
    }
    if let Some(profile) = &p.diffusion {
        w.put(&f("diffusion.csv"), &profile.to_csv())?;
        let empty = "x,y\n".to_string();
        w.put(&f("curve_out.csv"), &p.curve_out.as_ref().map_or(empty.clone(), CumulativeCurve::to_csv))?;
        w.put(&f("curve_in.csv"), &p.curve_in.as_ref().map_or(empty, CumulativeCurve::to_csv))?;
    }
    if let Some(b) = &p.blocks {
        w.put(&f("blocks.csv"), &b.to_csv())?;
        w.put(&f("block_density.csv"), &BlockPartition::matrix_csv(&b.density_matrix))?;
        w.put(&f("block_image.csv"), &BlockPartition::matrix_csv(&b.image_matrix))?;
        w.put(&f("blocks.dot"), &b.image_dot(dir))?;
    }
    Ok(())
}

fn pick(p: &PeriodResult, d: FlowDirection) -> Option<&CumulativeCurve> {
    match d {
        FlowDirection::Out => p.curve_out.as_ref(),
        FlowDirection::In => p.curve_in.as_ref(),
    }
}

fn points(c: &CumulativeCurve) -> Vec<(f64, f64)> {
    c.bin_midpoints.iter().copied().zip(c.cumulative_proportion.iter().copied()).collect()
}

/// Writes every artifact of `report` under `out`.
pub fn write_report(report: &RunReport, out: &Path) -> Result<(), PipelineError> {
    let w = Writer { root: out.to_path_buf() };
    for p in &report.periods {
        write_period(&w, p)?;
    }
    let summary: Vec<PeriodSummary> = report
        .periods
        .iter()
        .map(|p| PeriodSummary {
            name: &p.period.name,
            start: p.period.start.to_string(),
            end: p.period.end.to_string(),
            n_obs: p.n_obs,
            n_nodes: p.node_ids.len(),
            fits: p.fits.len(),
            tests: p.tests.len(),
            not_converged: p.tests.iter().filter(|t| t.status == TestStatus::NotConverged).count(),
            untestable: p.tests.iter().filter(|t| t.status == TestStatus::Untestable).count(),
            topology: p.topology(),
            concor_degenerate: p.blocks.as_ref().map(|b| b.degenerate),
        })
        .collect();
    w.put("run.json", &json(&summary))?;
    if let Some(c) = &report.comparison {
        w.put("comparison.json", &json(c))?;
        for (dir, label) in [(FlowDirection::Out, "out"), (FlowDirection::In, "in")] {
            let mut series: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
            for name in [LOCKDOWN, NORMAL_LOCKDOWN, RECOVERY, NORMAL_RECOVERY] {
                let curve = report.periods.iter().find(|p| p.period.name == name).and_then(|p| pick(p, dir));
                if let Some(c) = curve {
                    series.push((name, points(c)));
                }
            }
            let refs: Vec<(&str, &[(f64, f64)])> = series.iter().map(|(n, v)| (*n, v.as_slice())).collect();
            let svg = svg::line_chart(
                &format!("Cumulative local {label}-spillover index"),
                "local spillover index",
                "cumulative proportion of nodes",
                &refs,
            );
            w.put(&format!("comparison_{label}.svg"), &svg)?;
        }
    }
    Ok(())
}

/// Loads the input, runs the stages for `target` and writes the results to
/// the configured output directory.
pub fn run_pipeline(config: &RunConfig, target: Target) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let panel = load_input(config)?;
    let report = analyze(config, &panel, target)?;
    write_report(&report, &config.output)?;
    Ok(report)
}
