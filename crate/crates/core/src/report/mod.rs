//! Artifacts from run traces: CSV rows, a JSON mirror, SVG learning curves
//! and per-metric summaries.

mod csv;
mod summary;
mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RoundRecord, RunTrace};

pub use self::csv::{emit_csv, read_csv, read_csv_path, write_csv, CsvRow};
pub use self::summary::{render_summary, summarize, trapezoid_area, SummaryRow};
pub use self::svg::{emit_curves_svg, render_svg, AxesConfig};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: {0}")]
    Empty(&'static str),
    #[error("traces for {metric} have different rounds")]
    MisalignedTraces { metric: String },
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ReportError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ReportError::Io { path: path.to_path_buf(), source }
    }
}

/// One line of a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub label: String,
    /// `(round, value)`, rounds strictly increasing.
    pub points: Vec<(usize, f64)>,
    /// Per-point `(min, max)` across replicates.
    pub band: Option<Vec<(f64, f64)>>,
}

impl CurveSeries {
    pub fn new(
        label: impl Into<String>,
        points: Vec<(usize, f64)>,
        band: Option<Vec<(f64, f64)>>,
    ) -> Result<Self, ReportError> {
        let label = label.into();
        let bad = |what: &str| Err(ReportError::Inconsistent(format!("series {label:?}: {what}")));
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("rounds not strictly increasing");
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return bad("non-finite value");
        }
        if let Some(band) = &band {
            if band.len() != points.len() {
                return bad("band length differs from point count");
            }
            // tolerate the rounding of a mean of equal values
            let slack = |v: f64| 1e-12 * v.abs().max(1.0);
            if band.iter().zip(&points).any(|(&(lo, hi), &(_, y))| lo > y + slack(y) || y > hi + slack(y)) {
                return bad("band does not contain the mean");
            }
        }
        Ok(Self { label, points, band })
    }
}

/// Mean and min/max of `value` across `traces` at every round all of them
/// reached.
pub fn mean_series(
    label: impl Into<String>,
    traces: &[&RunTrace],
    value: impl Fn(&RoundRecord) -> f64,
) -> Result<CurveSeries, ReportError> {
    let rounds = traces.iter().map(|t| t.records.len()).min().ok_or(ReportError::Empty("no traces for series"))?;
    let mut points = Vec::with_capacity(rounds);
    let mut band = Vec::with_capacity(rounds);
    for i in 0..rounds {
        let values: Vec<f64> = traces.iter().map(|t| value(&t.records[i])).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        points.push((traces[0].records[i].round, mean));
        band.push((lo, hi));
    }
    CurveSeries::new(label, points, Some(band))
}

/// One test-accuracy series per class, labeled with the class names.
pub fn per_class_series(trace: &RunTrace) -> Result<Vec<CurveSeries>, ReportError> {
    trace
        .class_names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let points = trace.records.iter().map(|r| (r.round, r.per_class_accuracy[c])).collect();
            CurveSeries::new(name.clone(), points, None)
        })
        .collect()
}

/// Pretty JSON array of the traces, configs included.
pub fn emit_json(traces: &[RunTrace], path: &Path) -> Result<(), ReportError> {
    if traces.is_empty() {
        return Err(ReportError::Empty("no traces"));
    }
    let mut bytes = serde_json::to_vec_pretty(traces).expect("traces serialize");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| ReportError::io(path, e))
}
