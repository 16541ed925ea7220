//! Pool-based active learning for image classification.
//!
//! The crate is organised around the train / score / select / label loop:
//!
//! - [`dataset`]: IDX (MNIST) parsing, a synthetic Gaussian-blob task, and
//!   seeded splits into seed set, unlabeled pool and test set.
//! - [`model`]: the [`model::Classifier`] contract with softmax-regression
//!   and one-hidden-layer MLP implementations trained by minibatch SGD.
//! - [`uncertainty`]: largest margin, smallest margin, least confidence and
//!   entropy scores, the random baseline, and deterministic top-k selection.
//! - [`engine`]: the round state machine, oracles, and multi-run comparison.
//! - [`report`]: CSV/JSON traces, SVG learning curves and summary tables.

pub mod dataset;
pub mod engine;
pub mod model;
pub mod report;
pub mod rng;
pub mod uncertainty;

pub use dataset::{Dataset, Example};
pub use engine::{Engine, RunConfig, RunTrace};
pub use model::{Architecture, Classifier, ModelParams, ProbVector, TrainHyper};
pub use uncertainty::Metric;
