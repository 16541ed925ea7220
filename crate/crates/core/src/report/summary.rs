use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::engine::RunTrace;
use crate::uncertainty::Metric;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub replicates: usize,
    /// Mean test accuracy at the last round.
    pub final_accuracy: f64,
    /// Mean labeled-set size at the last round.
    pub final_labeled: f64,
    /// First round whose mean test accuracy reaches the threshold.
    pub rounds_to_threshold: Option<usize>,
    /// Trapezoidal area under the mean accuracy curve over rounds.
    pub area: f64,
}

/// Area under `(x, y)` by the trapezoid rule; zero for fewer than two
/// points.
pub fn trapezoid_area(points: &[(usize, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) as f64 * (w[0].1 + w[1].1) / 2.0).sum()
}

/// One row per metric, in metric order. Replicates of a metric must cover
/// the same rounds. The result does not depend on trace order.
pub fn summarize(traces: &[RunTrace], threshold: f64) -> Result<Vec<SummaryRow>, ReportError> {
    if traces.is_empty() {
        return Err(ReportError::Empty("no traces"));
    }
    let mut groups: BTreeMap<Metric, Vec<&RunTrace>> = BTreeMap::new();
    for t in traces {
        groups.entry(t.metric).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|(metric, mut group)| {
            group.sort_by(|a, b| (a.seed, &a.run_id).cmp(&(b.seed, &b.run_id)));
            let rounds: Vec<usize> = group[0].records.iter().map(|r| r.round).collect();
            if rounds.is_empty() || group.iter().any(|t| !t.records.iter().map(|r| r.round).eq(rounds.iter().copied()))
            {
                return Err(ReportError::MisalignedTraces { metric: metric.to_string() });
            }
            let n = group.len() as f64;
            let mean = |i: usize, f: &dyn Fn(&crate::engine::RoundRecord) -> f64| {
                group.iter().map(|t| f(&t.records[i])).sum::<f64>() / n
            };
            let curve: Vec<(usize, f64)> =
                rounds.iter().enumerate().map(|(i, &r)| (r, mean(i, &|rec| rec.test_accuracy))).collect();
            let last = rounds.len() - 1;
            Ok(SummaryRow {
                metric: metric.to_string(),
                replicates: group.len(),
                final_accuracy: curve[last].1,
                final_labeled: mean(last, &|rec| rec.labeled_count as f64),
                rounds_to_threshold: curve.iter().find(|p| p.1 >= threshold).map(|p| p.0),
                area: trapezoid_area(&curve),
            })
        })
        .collect()
}

/// Aligned plain-text table.
pub fn render_summary(rows: &[SummaryRow], threshold: f64) -> String {
    let reach = format!("rounds_to_{threshold}");
    let header = ["metric", "replicates", "final_accuracy", "final_labeled", reach.as_str(), "area"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.metric.clone(),
                r.replicates.to_string(),
                format!("{:.4}", r.final_accuracy),
                format!("{:.1}", r.final_labeled),
                r.rounds_to_threshold.map_or_else(|| "never".to_string(), |v| v.to_string()),
                format!("{:.4}", r.area),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..6).map(|c| cells.iter().map(|row| row[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let mut line = |fields: &[&str]| {
        let padded: Vec<String> = fields
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (f, &w))| if c == 0 { format!("{f:<w$}") } else { format!("{f:>w$}") })
            .collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).expect("write to string");
    };
    line(&header);
    for row in &cells {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
