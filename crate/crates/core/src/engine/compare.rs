use std::sync::Arc;

use rayon::prelude::*;

use super::{run, EngineError, RunConfig, RunTrace};
use crate::dataset::Dataset;
use crate::report::{mean_series, CurveSeries};
use crate::uncertainty::Metric;

#[derive(Clone, Debug)]
pub struct Comparison {
    /// Metric-major, seeds in the order given.
    pub traces: Vec<RunTrace>,
    /// Mean test accuracy per metric with the replicate min/max band.
    pub accuracy: Vec<CurveSeries>,
}

/// Runs every metric under every replicate seed. Runs sharing a seed share
/// the split, seed set and initial model, so metrics differ only in what
/// they select. Independent runs execute in parallel.
pub fn compare_runs(
    dataset: Arc<Dataset>,
    base: &RunConfig,
    metrics: &[Metric],
    seeds: &[u64],
) -> Result<Comparison, EngineError> {
    let mut distinct = metrics.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != metrics.len() || metrics.len() < 2 {
        return Err(EngineError::Config("compare needs at least two distinct metrics".into()));
    }
    if seeds.is_empty() {
        return Err(EngineError::Config("compare needs at least one replicate seed".into()));
    }
    base.validate()?;

    let jobs: Vec<RunConfig> = metrics
        .iter()
        .flat_map(|&metric| seeds.iter().map(move |&rng_seed| RunConfig { metric, rng_seed, ..base.clone() }))
        .collect();
    let traces = jobs.into_par_iter().map(|cfg| run(cfg, dataset.clone())).collect::<Result<Vec<_>, _>>()?;

    let accuracy = traces
        .chunks(seeds.len())
        .map(|group| {
            let refs: Vec<&RunTrace> = group.iter().collect();
            mean_series(group[0].metric.to_string(), &refs, |r| r.test_accuracy)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    Ok(Comparison { traces, accuracy })
}
