//! Multi-node daily series panels.
//!
//! A [`SeriesPanel`] holds one column per node and one row per calendar day.
//! Panels are read from delimiter-separated text whose first column (unless
//! the schema names another) carries ISO-8601 dates.

use std::collections::HashSet;
use std::io::{Read, Write};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest run of consecutive missing days that linear gap-filling bridges.
pub const MAX_FILLED_GAP: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("input is empty")]
    Empty,
    #[error("need at least 2 numeric columns, found {0}")]
    TooFewColumns(usize),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("line {line}: cannot parse date {value:?} (expected YYYY-MM-DD)")]
    BadDate { line: usize, value: String },
    #[error("line {line}, column {column:?}: non-numeric cell {value:?}")]
    NonNumericCell {
        line: usize,
        column: String,
        value: String,
    },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("{missing} missing day(s) between {after} and {before}")]
    MissingDate {
        after: NaiveDate,
        before: NaiveDate,
        missing: usize,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("values matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("dates must be strictly increasing (violated at {0})")]
    UnsortedDates(NaiveDate),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("period {name:?} ({start}..{end}) is invalid or outside the panel range")]
    PeriodOutOfRange {
        name: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("period {0:?} selects no rows")]
    EmptySlice(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// How gaps in the daily date sequence are treated on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapFill {
    /// Any missing day is an error.
    #[default]
    None,
    /// Gaps of up to [`MAX_FILLED_GAP`] days are linearly interpolated.
    Linear,
}

/// Column mapping for [`load_panel`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelSchema {
    /// Name of the date column; `None` means the first column.
    pub date_column: Option<String>,
    /// Node columns to keep, in order; `None` keeps every non-date column.
    pub node_columns: Option<Vec<String>>,
    /// Field delimiter; `None` auto-detects among comma, tab and semicolon.
    pub delimiter: Option<u8>,
    pub gap_fill: GapFill,
}

/// An analysis window, both ends inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(name: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            name: name.into(),
            start,
            end,
        }
    }

    /// Number of calendar days covered, inclusive.
    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

/// Aligned daily observations, `T` rows by `N` node columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    node_ids: Vec<String>,
    dates: Vec<NaiveDate>,
    values: DMatrix<f64>,
}

impl SeriesPanel {
    /// Builds a panel, checking shape, date order, node uniqueness and finiteness.
    pub fn new(
        node_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        values: DMatrix<f64>,
    ) -> Result<Self, PanelError> {
        if node_ids.len() < 2 {
            return Err(PanelError::TooFewColumns(node_ids.len()));
        }
        if dates.is_empty() {
            return Err(PanelError::Empty);
        }
        let mut seen = HashSet::new();
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return Err(PanelError::DuplicateNode(id.clone()));
            }
        }
        if values.nrows() != dates.len() || values.ncols() != node_ids.len() {
            return Err(PanelError::ShapeMismatch {
                rows: values.nrows(),
                cols: values.ncols(),
                expected_rows: dates.len(),
                expected_cols: node_ids.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(PanelError::DuplicateDate(w[1]));
            }
            if w[1] < w[0] {
                return Err(PanelError::UnsortedDates(w[1]));
            }
        }
        for c in 0..values.ncols() {
            for r in 0..values.nrows() {
                if !values[(r, c)].is_finite() {
                    return Err(PanelError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self {
            node_ids,
            dates,
            values,
        })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// The `T x N` value matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of rows (days).
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Two columns as an `T x 2` matrix, in the order given.
    pub fn pair(&self, i: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), 2, |r, c| {
            self.values[(r, if c == 0 { i } else { j })]
        })
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    /// Period spanning the whole panel.
    pub fn full_range(&self) -> PeriodSpec {
        PeriodSpec::new("full", self.dates[0], *self.dates.last().unwrap())
    }

    /// Rows with dates inside `spec`, inclusive at both ends.
    pub fn slice_period(&self, spec: &PeriodSpec) -> Result<SeriesPanel, PanelError> {
        let first = self.dates[0];
        let last = *self.dates.last().unwrap();
        if spec.start > spec.end || spec.start < first || spec.end > last {
            return Err(PanelError::PeriodOutOfRange {
                name: spec.name.clone(),
                start: spec.start,
                end: spec.end,
            });
        }
        let lo = self.dates.partition_point(|d| *d < spec.start);
        let hi = self.dates.partition_point(|d| *d <= spec.end);
        if lo >= hi {
            return Err(PanelError::EmptySlice(spec.name.clone()));
        }
        Ok(SeriesPanel {
            node_ids: self.node_ids.clone(),
            dates: self.dates[lo..hi].to_vec(),
            values: self.values.rows(lo, hi - lo).into_owned(),
        })
    }

    /// Day-over-day differences; the first date is dropped.
    pub fn first_difference(&self) -> Result<SeriesPanel, PanelError> {
        let t = self.len();
        if t < 2 {
            return Err(PanelError::Empty);
        }
        let values = DMatrix::from_fn(t - 1, self.n_nodes(), |r, c| {
            self.values[(r + 1, c)] - self.values[(r, c)]
        });
        Ok(SeriesPanel {
            node_ids: self.node_ids.clone(),
            dates: self.dates[1..].to_vec(),
            values,
        })
    }

    /// Writes the panel as comma-separated text readable by [`load_panel`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.node_ids.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (r, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend((0..self.n_nodes()).map(|c| format!("{}", self.values[(r, c)])));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| PanelError::Csv(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> PanelError {
    PanelError::Csv(e.to_string())
}

/// Picks the candidate delimiter occurring most often in the header line.
fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    [b',', b'\t', b';']
        .into_iter()
        .max_by_key(|d| (header.bytes().filter(|b| b == d).count(), *d == b','))
        .unwrap_or(b',')
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Reads a delimiter-separated panel. Rows may arrive in any order; they are
/// sorted by date before the daily-sequence check.
pub fn load_panel<R: Read>(mut source: R, schema: &PanelSchema) -> Result<SeriesPanel, PanelError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| PanelError::Csv(e.to_string()))?;
    let text = text.trim_start_matches('\u{feff}');
    if text.trim().is_empty() {
        return Err(PanelError::Empty);
    }
    let delimiter = schema.delimiter.unwrap_or_else(|| detect_delimiter(text));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();

    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let date_col = match &schema.date_column {
        Some(name) => find(name)?,
        None => 0,
    };
    let node_cols: Vec<usize> = match &schema.node_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_, _>>()?,
        None => (0..header.len()).filter(|&c| c != date_col).collect(),
    };
    if node_cols.len() < 2 {
        return Err(PanelError::TooFewColumns(node_cols.len()));
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(PanelError::RaggedRow {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let raw_date = &rec[date_col];
        let date = parse_date(raw_date).ok_or_else(|| PanelError::BadDate {
            line,
            value: raw_date.to_string(),
        })?;
        let vals = node_cols
            .iter()
            .map(|&c| {
                let cell = &rec[c];
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| PanelError::NonNumericCell {
                        line,
                        column: header[c].clone(),
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((date, vals));
    }
    if rows.is_empty() {
        return Err(PanelError::Empty);
    }
    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(PanelError::DuplicateDate(w[0].0));
        }
    }

    let n = node_cols.len();
    let mut dates = Vec::with_capacity(rows.len());
    let mut flat: Vec<f64> = Vec::with_capacity(rows.len() * n);
    for (k, (date, vals)) in rows.iter().enumerate() {
        if k > 0 {
            let (prev_date, prev_vals) = &rows[k - 1];
            let missing = ((*date - *prev_date).num_days() - 1) as usize;
            if missing > 0 {
                if schema.gap_fill != GapFill::Linear || missing > MAX_FILLED_GAP {
                    return Err(PanelError::MissingDate {
                        after: *prev_date,
                        before: *date,
                        missing,
                    });
                }
                for step in 1..=missing {
                    let frac = step as f64 / (missing + 1) as f64;
                    dates.push(*prev_date + chrono::Days::new(step as u64));
                    flat.extend(
                        prev_vals
                            .iter()
                            .zip(vals)
                            .map(|(a, b)| a + (b - a) * frac),
                    );
                }
            }
        }
        dates.push(*date);
        flat.extend_from_slice(vals);
    }
    let values = DMatrix::from_row_slice(dates.len(), n, &flat);
    let node_ids = node_cols.iter().map(|&c| header[c].clone()).collect();
    SeriesPanel::new(node_ids, dates, values)
}
