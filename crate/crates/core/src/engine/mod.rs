//! The active learning loop.
//!
//! Each round trains on the labeled set T, evaluates on the test set S,
//! scores every example in the pool P, selects the k most informative,
//! asks an oracle for their labels and moves them from P to T.
//!
//! A round is split at the oracle call: [`Engine::begin_round`] does the
//! computation up to selection without touching committed state, and
//! [`Engine::complete_round`] applies the labels. [`Engine::step_round`]
//! drives both halves with an [`Oracle`].

mod compare;
mod config;
mod oracle;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{split, Dataset, DatasetError};
use crate::model::{evaluate, Classifier, ModelError, ModelParams, Sample};
use crate::rng::{self, Purpose};
use crate::uncertainty::{informativeness, select_top_k, DrawContext, Metric};

pub use compare::{compare_runs, Comparison};
pub use config::{RunConfig, ScanMode, StopReason};
pub use oracle::{AnswerError, Oracle, OracleError, QueueHandle, QueuedOracle, SimulatedOracle};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("oracle timed out; round not applied")]
    OracleTimeout,
    #[error("oracle failed: {0}")]
    Oracle(OracleError),
    #[error("run already finished ({0})")]
    Finished(StopReason),
    #[error("a round is already awaiting labels")]
    RoundPending,
    #[error("no round is awaiting labels")]
    NoPendingRound,
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("state invariant violated: {0}")]
    Invariant(String),
}

impl From<OracleError> for EngineError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Timeout => EngineError::OracleTimeout,
            other => EngineError::Oracle(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// Size of the labeled set the round's model was trained on.
    pub labeled_count: usize,
    /// Mean training loss of the final epoch.
    pub train_loss: f64,
    /// 1 - accuracy on the labeled set after training.
    pub train_error: f64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub per_class_accuracy: Vec<f64>,
    /// Test examples per class.
    pub test_support: Vec<usize>,
    /// Labeled (training) examples per class, by oracle label, at training
    /// time.
    pub labeled_support: Vec<usize>,
    /// Ids queried this round, ascending.
    pub selected_ids: Vec<usize>,
    /// The oracle's answers, aligned with `selected_ids`.
    pub selected_labels: Vec<usize>,
    /// Fraction of this round's oracle labels equal to the ground truth;
    /// 1.0 when nothing was queried.
    pub oracle_agreement: f64,
    /// Compute time, excluding time spent waiting for the oracle.
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run_id: String,
    pub metric: Metric,
    pub seed: u64,
    pub config: RunConfig,
    pub class_names: Vec<String>,
    pub records: Vec<RoundRecord>,
    pub stop_reason: Option<StopReason>,
}

impl RunTrace {
    pub fn run_id_for(metric: Metric, seed: u64) -> String {
        format!("{metric}-s{seed}")
    }

    /// Copy with every wall-time field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        t.records.iter_mut().for_each(|r| r.wall_ms = 0);
        t
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

struct PendingRound<C> {
    model: C,
    record: RoundRecord,
    compute_ms: u64,
}

pub struct Engine<C: Classifier + Clone = ModelParams> {
    dataset: Arc<Dataset>,
    config: RunConfig,
    model: C,
    /// id -> oracle label
    labeled: BTreeMap<usize, usize>,
    /// ascending
    pool: Vec<usize>,
    test: Vec<usize>,
    records: Vec<RoundRecord>,
    stop: Option<StopReason>,
    pending: Option<PendingRound<C>>,
}

impl Engine<ModelParams> {
    /// Engine with a freshly initialized [`ModelParams`] of the configured
    /// architecture.
    pub fn new(config: RunConfig, dataset: Arc<Dataset>) -> Result<Self, EngineError> {
        config.validate()?;
        let model = ModelParams::init(config.arch, dataset.feature_dim(), dataset.num_classes(), config.rng_seed)?;
        Self::with_model(config, dataset, model)
    }
}

impl<C: Classifier + Clone> Engine<C> {
    /// The seed set is labeled with ground truth; every later label comes
    /// from an oracle.
    pub fn with_model(config: RunConfig, dataset: Arc<Dataset>, model: C) -> Result<Self, EngineError> {
        config.validate()?;
        if model.num_classes() != dataset.num_classes() || model.feature_dim() != dataset.feature_dim() {
            return Err(EngineError::Config(format!(
                "model expects {} features / {} classes, dataset has {} / {}",
                model.feature_dim(),
                model.num_classes(),
                dataset.feature_dim(),
                dataset.num_classes()
            )));
        }
        let parts = split(&dataset, &config.split_spec())?;
        let labeled = parts.seed.iter().map(|&id| (id, dataset.examples()[id].true_label)).collect();
        let engine = Self {
            dataset,
            config,
            model,
            labeled,
            pool: parts.pool,
            test: parts.test,
            records: Vec::new(),
            stop: None,
            pending: None,
        };
        engine.check_invariants()?;
        Ok(engine)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn model(&self) -> &C {
        &self.model
    }

    /// Labeled ids with their oracle labels, ascending by id.
    pub fn labeled(&self) -> &BTreeMap<usize, usize> {
        &self.labeled
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn test_ids(&self) -> &[usize] {
        &self.test
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    /// Rounds completed so far.
    pub fn rounds_completed(&self) -> usize {
        self.records.len()
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn is_finished(&self) -> bool {
        self.stop.is_some()
    }

    /// Ids awaiting oracle labels, ascending.
    pub fn pending_query(&self) -> Option<&[usize]> {
        self.pending.as_ref().map(|p| p.record.selected_ids.as_slice())
    }

    pub fn trace(&self) -> RunTrace {
        RunTrace {
            run_id: RunTrace::run_id_for(self.config.metric, self.config.rng_seed),
            metric: self.config.metric,
            seed: self.config.rng_seed,
            config: self.config.clone(),
            class_names: self.dataset.class_names().to_vec(),
            records: self.records.clone(),
            stop_reason: self.stop,
        }
    }

    fn samples<'a>(&'a self, ids: impl Iterator<Item = (usize, usize)> + 'a) -> Vec<Sample<'a>> {
        ids.map(|(id, label)| Sample { features: &self.dataset.examples()[id].features, label }).collect()
    }

    /// Trains, evaluates and selects the next query. Committed state is
    /// untouched until [`Engine::complete_round`]. Returns the queried ids,
    /// ascending; empty when the pool is empty.
    pub fn begin_round(&mut self) -> Result<&[usize], EngineError> {
        if let Some(reason) = self.stop {
            return Err(EngineError::Finished(reason));
        }
        if self.pending.is_some() {
            return Err(EngineError::RoundPending);
        }
        let started = Instant::now();
        let round = self.records.len() + 1;
        let cfg = &self.config;
        let k_classes = self.dataset.num_classes();

        let mut model = self.model.clone();
        if cfg.cold_start {
            model.reinitialize();
        }
        let train = self.samples(self.labeled.iter().map(|(&id, &label)| (id, label)));
        let train_seed = rng::derive_seed(cfg.rng_seed, Purpose::Shuffle, round as u64);
        let train_loss = model.fit_round(&train, &cfg.hyper, train_seed)?;
        let train_eval = evaluate(&model, &train)?;
        let mut labeled_support = vec![0; k_classes];
        for s in &train {
            labeled_support[s.label] += 1;
        }

        let test = self.samples(self.test.iter().map(|&id| (id, self.dataset.examples()[id].true_label)));
        let test_eval = evaluate(&model, &test)?;

        let selected = self.select(&model, round)?;
        let record = RoundRecord {
            round,
            labeled_count: train.len(),
            train_loss,
            train_error: 1.0 - train_eval.accuracy,
            test_accuracy: test_eval.accuracy,
            test_loss: test_eval.mean_loss,
            per_class_accuracy: test_eval.per_class_accuracy,
            test_support: test_eval.per_class_support,
            labeled_support,
            selected_ids: selected,
            selected_labels: Vec::new(),
            oracle_agreement: 1.0,
            wall_ms: 0,
        };
        let compute_ms = started.elapsed().as_millis() as u64;
        let pending = self.pending.insert(PendingRound { model, record, compute_ms });
        Ok(&pending.record.selected_ids)
    }

    /// Scores the whole pool with `model` and picks up to k ids, ascending.
    fn select(&self, model: &C, round: usize) -> Result<Vec<usize>, EngineError> {
        let cfg = &self.config;
        let k = cfg.per_round_k.min(self.pool.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        let ctx = DrawContext { seed: cfg.rng_seed, round: round as u64 };
        let scores: Vec<f64> = self
            .pool
            .par_iter()
            .map(|&id| {
                let p = model.predict_proba(&self.dataset.examples()[id].features)?;
                Ok(informativeness(cfg.metric, &p, ctx, id as u64).value)
            })
            .collect::<Result<_, ModelError>>()?;

        let positions = match cfg.scan {
            ScanMode::Global => select_top_k(&scores, k),
            ScanMode::Batched { batch } => batched_select(&scores, k, batch),
        };
        Ok(positions.into_iter().map(|i| self.pool[i]).collect())
    }

    /// Applies oracle labels (aligned with the pending query) and commits
    /// the round.
    pub fn complete_round(&mut self, labels: &[usize]) -> Result<&RoundRecord, EngineError> {
        let pending = self.pending.as_ref().ok_or(EngineError::NoPendingRound)?;
        let expected = pending.record.selected_ids.len();
        if labels.len() != expected {
            return Err(EngineError::LabelCount { expected, got: labels.len() });
        }
        let classes = self.dataset.num_classes();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(EngineError::LabelOutOfRange { label, classes });
        }

        let started = Instant::now();
        let PendingRound { model, mut record, compute_ms } = self.pending.take().expect("checked above");
        let agree = record
            .selected_ids
            .iter()
            .zip(labels)
            .filter(|(&id, &label)| self.dataset.examples()[id].true_label == label)
            .count();
        if !labels.is_empty() {
            record.oracle_agreement = agree as f64 / labels.len() as f64;
        }
        record.selected_labels = labels.to_vec();

        for (&id, &label) in record.selected_ids.iter().zip(labels) {
            self.labeled.insert(id, label);
        }
        let chosen = &record.selected_ids;
        self.pool.retain(|id| chosen.binary_search(id).is_err());
        self.model = model;

        let cfg = &self.config;
        self.stop = if cfg.epsilon.is_some_and(|eps| record.train_error <= eps) {
            Some(StopReason::TrainingErrorBound)
        } else if self.pool.is_empty() {
            Some(StopReason::PoolExhausted)
        } else if cfg.max_rounds.is_some_and(|m| record.round >= m) {
            Some(StopReason::MaxRounds)
        } else {
            None
        };
        record.wall_ms = compute_ms + started.elapsed().as_millis() as u64;
        self.records.push(record);
        self.check_invariants()?;
        Ok(self.records.last().expect("just pushed"))
    }

    /// Drops a pending round; committed state is unchanged.
    pub fn abort_round(&mut self) {
        self.pending = None;
    }

    /// One full round. On an oracle timeout the round is discarded and the
    /// engine can be stepped again.
    pub fn step_round(&mut self, oracle: &mut dyn Oracle) -> Result<RoundRecord, EngineError> {
        let query = self.begin_round()?.to_vec();
        let labels = if query.is_empty() {
            Vec::new()
        } else {
            match oracle.label(&query) {
                Ok(labels) => labels,
                Err(e) => {
                    self.abort_round();
                    return Err(e.into());
                }
            }
        };
        match self.complete_round(&labels) {
            Ok(record) => Ok(record.clone()),
            Err(e) => {
                self.abort_round();
                Err(e)
            }
        }
    }

    /// Steps until a stop rule fires.
    pub fn run_to_end(&mut self, oracle: &mut dyn Oracle) -> Result<RunTrace, EngineError> {
        while !self.is_finished() {
            self.step_round(oracle)?;
        }
        Ok(self.trace())
    }

    /// T, P and S pairwise disjoint, and sizes add up.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        let mut owner = vec![0u8; self.dataset.len()];
        let sets: [(u8, &mut dyn Iterator<Item = usize>); 3] = [
            (1, &mut self.labeled.keys().copied()),
            (2, &mut self.pool.iter().copied()),
            (3, &mut self.test.iter().copied()),
        ];
        for (tag, ids) in sets {
            for id in ids {
                match owner.get_mut(id) {
                    None => return Err(EngineError::Invariant(format!("id {id} outside the dataset"))),
                    Some(0) => owner[id] = tag,
                    Some(other) => {
                        return Err(EngineError::Invariant(format!("id {id} in two sets ({other} and {tag})")))
                    }
                }
            }
        }
        let queried: usize = self.records.iter().map(|r| r.selected_ids.len()).sum();
        if self.labeled.len() != self.config.seed_size + queried {
            return Err(EngineError::Invariant(format!(
                "labeled set has {} ids, expected {}",
                self.labeled.len(),
                self.config.seed_size + queried
            )));
        }
        Ok(())
    }
}

/// Runs a configuration to completion with ground-truth labels.
pub fn run(config: RunConfig, dataset: Arc<Dataset>) -> Result<RunTrace, EngineError> {
    let mut oracle = SimulatedOracle::new(dataset.clone());
    Engine::new(config, dataset)?.run_to_end(&mut oracle)
}

/// Contiguous chunks of `batch` scores each nominate their top
/// `ceil(k * chunk_len / total)`; the global top k of the nominees wins.
fn batched_select(scores: &[f64], k: usize, batch: usize) -> Vec<usize> {
    let total = scores.len();
    let mut nominees = Vec::new();
    for (c, chunk) in scores.chunks(batch).enumerate() {
        let quota = (k * chunk.len()).div_ceil(total);
        nominees.extend(select_top_k(chunk, quota).into_iter().map(|i| c * batch + i));
    }
    let nominee_scores: Vec<f64> = nominees.iter().map(|&i| scores[i]).collect();
    let mut chosen: Vec<usize> = select_top_k(&nominee_scores, k).into_iter().map(|j| nominees[j]).collect();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests;
