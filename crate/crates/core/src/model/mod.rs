//! Probabilistic classifiers.
//!
//! Active learning only needs class probabilities, so the engine talks to
//! models through [`Classifier`]. [`ModelParams`] provides softmax
//! regression and a one-hidden-layer ReLU MLP, both trained with plain
//! minibatch SGD on cross-entropy.

mod checkpoint;
mod eval;
mod gradcheck;
mod network;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use eval::{evaluate, Evaluation};
pub use gradcheck::{grad_check, grad_check_sampled, GRADCHECK_MIN_COORDS};
pub use network::{Layer, ModelParams};

/// Lower clamp applied to probabilities inside the training loss.
pub const LOSS_PROB_FLOOR: f64 = 1e-12;
/// Allowed deviation of a probability vector's sum from 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training loss became non-finite (learning rate too high?)")]
    NonFiniteLoss,
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A distribution over `K >= 2` classes: entries non-negative, summing to
/// one within [`PROB_SUM_TOLERANCE`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.len() < 2 {
            return Err(ModelError::InvalidProbabilities(format!("need K >= 2, got {}", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::InvalidProbabilities("entries must be finite and non-negative".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(ModelError::InvalidProbabilities(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Numerically stable softmax (max-subtracted).
    pub fn from_logits(logits: &[f64]) -> Result<Self, ModelError> {
        let mut probs = logits.to_vec();
        softmax_in_place(&mut probs);
        Self::new(probs)
    }

    pub fn uniform(k: usize) -> Result<Self, ModelError> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Architecture {
    Softmax,
    Mlp { hidden: usize },
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Softmax => write!(f, "softmax"),
            Architecture::Mlp { hidden } => write!(f, "mlp(hidden={hidden})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    /// The last batch of an epoch may be shorter.
    pub minibatch_size: usize,
    pub epochs_per_round: usize,
    /// L2 penalty on weights (not biases).
    pub l2: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { learning_rate: 0.1, minibatch_size: 128, epochs_per_round: 10, l2: 0.0 }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidHyper(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.minibatch_size == 0 {
            return Err(ModelError::InvalidHyper("minibatch_size must be >= 1".into()));
        }
        if self.epochs_per_round == 0 {
            return Err(ModelError::InvalidHyper("epochs_per_round must be >= 1".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(ModelError::InvalidHyper(format!("l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

/// One labeled training input.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub features: &'a [f64],
    pub label: usize,
}

pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;

    fn feature_dim(&self) -> usize;

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError>;

    /// Runs `epochs_per_round` epochs of minibatch SGD over a shuffle of
    /// `samples` seeded by `seed`, returning the final epoch's mean loss.
    fn fit_round(&mut self, samples: &[Sample<'_>], hyper: &TrainHyper, seed: u64) -> Result<f64, ModelError>;

    /// Restores the freshly initialized parameters.
    fn reinitialize(&mut self);
}
