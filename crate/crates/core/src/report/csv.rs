//! One row per round:
//!
//! ```text
//! run_id,metric,seed,round,labeled_count,train_loss,test_accuracy,
//! class_acc_0..class_acc_{K-1},class_support_0..class_support_{K-1},selected_ids
//! ```
//!
//! `class_support_c` counts labeled (training) examples of class `c`, so a
//! class that is never queried keeps a flat support column. Selected ids
//! are `;`-joined. Floats use Rust's shortest round-trip formatting.

use std::io::{Read, Write};
use std::path::Path;

use super::ReportError;
use crate::engine::RunTrace;

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub run_id: String,
    pub metric: String,
    pub seed: u64,
    pub round: usize,
    pub labeled_count: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub class_acc: Vec<f64>,
    pub class_support: Vec<usize>,
    pub selected_ids: Vec<usize>,
}

fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["run_id", "metric", "seed", "round", "labeled_count", "train_loss", "test_accuracy"]
        .map(String::from)
        .to_vec();
    h.extend((0..k).map(|c| format!("class_acc_{c}")));
    h.extend((0..k).map(|c| format!("class_support_{c}")));
    h.push("selected_ids".into());
    h
}

fn csv_err(e: ::csv::Error) -> ReportError {
    ReportError::Csv(e.to_string())
}

/// Writes header plus one row per round, sorted by (metric, seed, round).
/// Returns the number of data rows.
pub fn write_csv<W: Write>(traces: &[RunTrace], out: W) -> Result<usize, ReportError> {
    let k = traces.first().ok_or(ReportError::Empty("no traces"))?.num_classes();
    if let Some(t) = traces.iter().find(|t| t.num_classes() != k) {
        return Err(ReportError::Inconsistent(format!("{} has {} classes, expected {k}", t.run_id, t.num_classes())));
    }
    let mut order: Vec<&RunTrace> = traces.iter().collect();
    order.sort_by(|a, b| (a.metric, a.seed, &a.run_id).cmp(&(b.metric, b.seed, &b.run_id)));

    let mut w = ::csv::Writer::from_writer(out);
    w.write_record(header(k)).map_err(csv_err)?;
    let mut rows = 0;
    for t in order {
        let mut records: Vec<_> = t.records.iter().collect();
        records.sort_by_key(|r| r.round);
        for r in records {
            let mut fields = vec![
                t.run_id.clone(),
                t.metric.to_string(),
                t.seed.to_string(),
                r.round.to_string(),
                r.labeled_count.to_string(),
                r.train_loss.to_string(),
                r.test_accuracy.to_string(),
            ];
            fields.extend(r.per_class_accuracy.iter().map(f64::to_string));
            fields.extend(r.labeled_support.iter().map(usize::to_string));
            fields.push(r.selected_ids.iter().map(usize::to_string).collect::<Vec<_>>().join(";"));
            w.write_record(&fields).map_err(csv_err)?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| ReportError::Csv(e.to_string()))?;
    Ok(rows)
}

/// [`write_csv`] to a file. Nothing is created for an empty trace list.
pub fn emit_csv(traces: &[RunTrace], path: &Path) -> Result<usize, ReportError> {
    if traces.is_empty() {
        return Err(ReportError::Empty("no traces"));
    }
    let mut buf = Vec::new();
    let rows = write_csv(traces, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| ReportError::io(path, e))?;
    Ok(rows)
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, ReportError> {
    field.parse().map_err(|_| ReportError::Csv(format!("bad {what}: {field:?}")))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, ReportError> {
    let mut r = ::csv::Reader::from_reader(input);
    let head = r.headers().map_err(csv_err)?.clone();
    let k = head.iter().filter(|h| h.starts_with("class_acc_")).count();
    if head.iter().map(String::from).collect::<Vec<_>>() != header(k) {
        return Err(ReportError::Csv("unexpected header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let rec = &rec;
            let class = |offset: usize| (0..k).map(move |c| &rec[7 + offset + c]);
            let ids = &rec[7 + 2 * k];
            Ok(CsvRow {
                run_id: rec[0].to_string(),
                metric: rec[1].to_string(),
                seed: parse(&rec[2], "seed")?,
                round: parse(&rec[3], "round")?,
                labeled_count: parse(&rec[4], "labeled_count")?,
                train_loss: parse(&rec[5], "train_loss")?,
                test_accuracy: parse(&rec[6], "test_accuracy")?,
                class_acc: class(0).map(|f| parse(f, "class_acc")).collect::<Result<_, _>>()?,
                class_support: class(k).map(|f| parse(f, "class_support")).collect::<Result<_, _>>()?,
                selected_ids: if ids.is_empty() {
                    Vec::new()
                } else {
                    ids.split(';').map(|f| parse(f, "selected id")).collect::<Result<_, _>>()?
                },
            })
        })
        .collect()
}

pub fn read_csv_path(path: &Path) -> Result<Vec<CsvRow>, ReportError> {
    let file = std::fs::File::open(path).map_err(|e| ReportError::io(path, e))?;
    read_csv(std::io::BufReader::new(file))
}
