//! Run configuration in a flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! input = data/pm25.csv
//! nodes = Beijing, Tianjin, Shijiazhuang
//! period.lockdown = 2020-01-23..2020-04-07
//! alpha = 0.05
//! ```
//!
//! Keys: `input` (required), `output`, `date_column`, `nodes`, `delimiter`
//! (`comma`, `tab`, `semicolon` or a single character), `gap_fill` (`none`
//! or `linear`), `difference` (`true`/`false`), `period.<name>` (one or more,
//! `start..end` inclusive), `alpha`, `bins`, `seed`, `jobs`,
//! `max_iterations`, `gradient_tolerance`, `robust_errors`, `curve_model`
//! (`linear` or `exponential`), `concor_depth`, `concor_convergence`.
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bekk::{FitOptions, GradientMode};
use crate::blockmodel::{DEFAULT_CONVERGENCE, DEFAULT_MAX_DEPTH};
use crate::diffusion::{CurveModel, DEFAULT_BINS};
use crate::network::DEFAULT_ALPHA;
use crate::panel::{parse_date, GapFill, PanelSchema, PeriodSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("invalid value for {key:?}: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub date_column: Option<String>,
    pub nodes: Option<Vec<String>>,
    pub delimiter: Option<u8>,
    pub gap_fill: GapFill,
    pub difference: bool,
    pub periods: Vec<PeriodSpec>,
    pub alpha: f64,
    pub bins: usize,
    pub seed: u64,
    pub jobs: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub robust_errors: bool,
    pub curve_model: CurveModel,
    pub concor_depth: usize,
    pub concor_convergence: f64,
}

impl RunConfig {
    /// Defaults for everything except the input path and periods.
    pub fn new(input: impl Into<PathBuf>, periods: Vec<PeriodSpec>) -> Self {
        let fit = FitOptions::default();
        Self {
            input: input.into(),
            output: PathBuf::from("out"),
            date_column: None,
            nodes: None,
            delimiter: None,
            gap_fill: GapFill::None,
            difference: false,
            periods,
            alpha: DEFAULT_ALPHA,
            bins: DEFAULT_BINS,
            seed: 0,
            jobs: default_jobs(),
            max_iterations: fit.max_iter,
            gradient_tolerance: fit.grad_tol,
            robust_errors: false,
            curve_model: CurveModel::Linear,
            concor_depth: DEFAULT_MAX_DEPTH,
            concor_convergence: DEFAULT_CONVERGENCE,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.input.is_relative() {
            cfg.input = base.join(&cfg.input);
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::new(PathBuf::new(), Vec::new());
        let mut seen = std::collections::HashSet::new();
        let mut have_input = false;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            let invalid = |message: String| ConfigError::Invalid { key: key.into(), message };
            if let Some(name) = key.strip_prefix("period.") {
                cfg.periods.push(parse_period(name, value).map_err(invalid)?);
                continue;
            }
            match key {
                "input" => {
                    cfg.input = PathBuf::from(value);
                    have_input = true;
                }
                "output" => cfg.output = PathBuf::from(value),
                "date_column" => cfg.date_column = Some(value.to_string()),
                "nodes" => {
                    let nodes: Vec<String> = value.split(',').map(|s| s.trim().to_string()).collect();
                    if nodes.len() < 2 || nodes.iter().any(String::is_empty) {
                        return Err(invalid("need at least two non-empty node names".into()));
                    }
                    cfg.nodes = Some(nodes);
                }
                "delimiter" => {
                    cfg.delimiter = Some(match value {
                        "comma" | "," => b',',
                        "tab" | "\\t" => b'\t',
                        "semicolon" | ";" => b';',
                        v if v.len() == 1 => v.as_bytes()[0],
                        v => return Err(invalid(format!("unsupported delimiter {v:?}"))),
                    })
                }
                "gap_fill" => {
                    cfg.gap_fill = match value {
                        "none" => GapFill::None,
                        "linear" => GapFill::Linear,
                        v => return Err(invalid(format!("expected none or linear, got {v:?}"))),
                    }
                }
                "difference" => cfg.difference = parse_bool(value).map_err(invalid)?,
                "alpha" => cfg.alpha = parse_num(value).map_err(invalid)?,
                "bins" => cfg.bins = parse_num(value).map_err(invalid)?,
                "seed" => cfg.seed = parse_num(value).map_err(invalid)?,
                "jobs" => cfg.jobs = parse_num(value).map_err(invalid)?,
                "max_iterations" => cfg.max_iterations = parse_num(value).map_err(invalid)?,
                "gradient_tolerance" => cfg.gradient_tolerance = parse_num(value).map_err(invalid)?,
                "robust_errors" => cfg.robust_errors = parse_bool(value).map_err(invalid)?,
                "curve_model" => {
                    cfg.curve_model = match value {
                        "linear" => CurveModel::Linear,
                        "exponential" => CurveModel::Exponential,
                        v => return Err(invalid(format!("expected linear or exponential, got {v:?}"))),
                    }
                }
                "concor_depth" => cfg.concor_depth = parse_num(value).map_err(invalid)?,
                "concor_convergence" => cfg.concor_convergence = parse_num(value).map_err(invalid)?,
                _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
            }
        }
        if !have_input {
            return Err(ConfigError::Missing("input"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: &str| {
            Err(ConfigError::Invalid {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.periods.is_empty() {
            return Err(ConfigError::Missing("period.<name>"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid("alpha", "must lie in (0, 1)");
        }
        if self.bins == 0 {
            return invalid("bins", "must be positive");
        }
        if self.jobs == 0 {
            return invalid("jobs", "must be positive");
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations", "must be positive");
        }
        if !(self.gradient_tolerance > 0.0) {
            return invalid("gradient_tolerance", "must be positive");
        }
        if !(1..=2).contains(&self.concor_depth) {
            return invalid("concor_depth", "must be 1 or 2");
        }
        if !(self.concor_convergence > 0.0 && self.concor_convergence < 1.0) {
            return invalid("concor_convergence", "must lie in (0, 1)");
        }
        let mut names = std::collections::HashSet::new();
        for p in &self.periods {
            if !names.insert(p.name.as_str()) {
                return invalid(&format!("period.{}", p.name), "duplicate period name");
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> PanelSchema {
        PanelSchema {
            date_column: self.date_column.clone(),
            node_columns: self.nodes.clone(),
            delimiter: self.delimiter,
            gap_fill: self.gap_fill,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.max_iterations,
            grad_tol: self.gradient_tolerance,
            seed: self.seed,
            robust: self.robust_errors,
            gradient: GradientMode::Analytic,
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_period(name: &str, value: &str) -> Result<PeriodSpec, String> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(format!("period name {name:?} must be alphanumeric with - or _"));
    }
    let (a, b) = value.split_once("..").ok_or_else(|| format!("expected start..end, got {value:?}"))?;
    let start = parse_date(a.trim()).ok_or_else(|| format!("bad start date {a:?}"))?;
    let end = parse_date(b.trim()).ok_or_else(|| format!("bad end date {b:?}"))?;
    if end < start {
        return Err(format!("end {end} before start {start}"));
    }
    Ok(PeriodSpec::new(name, start, end))
}
