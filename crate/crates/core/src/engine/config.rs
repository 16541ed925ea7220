use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::dataset::SplitSpec;
use crate::model::{Architecture, TrainHyper};
use crate::uncertainty::Metric;

/// How the pool is scanned for the most informative examples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum ScanMode {
    /// Score every pool example and take the global top k.
    #[default]
    Global,
    /// Split the pool (ascending ids) into chunks of `batch`; each chunk
    /// nominates its top `ceil(k * chunk_len / pool_len)` and the global
    /// top k is taken among the nominees. A single chunk covering the pool
    /// is exactly [`ScanMode::Global`].
    Batched { batch: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub metric: Metric,
    /// Examples queried per round.
    pub per_round_k: usize,
    pub seed_size: usize,
    pub test_size: usize,
    /// Cap on the unlabeled pool; everything not in the seed or test set
    /// when absent.
    #[serde(default)]
    pub pool_size: Option<usize>,
    #[serde(default)]
    pub max_rounds: Option<usize>,
    /// Stop once the training error (1 - training accuracy on the labeled
    /// set) is at most this bound.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub hyper: TrainHyper,
    pub arch: Architecture,
    pub rng_seed: u64,
    /// Re-initialize the model every round instead of continuing from the
    /// previous round's parameters.
    #[serde(default)]
    pub cold_start: bool,
    #[serde(default)]
    pub scan: ScanMode,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::Config(msg));
        if self.per_round_k == 0 {
            return bad("per_round_k must be >= 1".into());
        }
        if self.seed_size < 2 {
            return bad(format!("seed_size must be >= 2, got {}", self.seed_size));
        }
        if self.test_size == 0 {
            return bad("test_size must be >= 1".into());
        }
        match (self.max_rounds, self.epsilon) {
            (None, None) => return bad("need max_rounds, epsilon, or both".into()),
            (Some(0), _) => return bad("max_rounds must be >= 1".into()),
            (_, Some(e)) if !(0.0..=1.0).contains(&e) => return bad(format!("epsilon must lie in [0, 1], got {e}")),
            _ => {}
        }
        if let Architecture::Mlp { hidden: 0 } = self.arch {
            return bad("hidden width must be >= 1".into());
        }
        if let ScanMode::Batched { batch: 0 } = self.scan {
            return bad("scan batch must be >= 1".into());
        }
        self.hyper.validate().map_err(|e| EngineError::Config(e.to_string()))
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed_size: self.seed_size,
            test_size: self.test_size,
            pool_size: self.pool_size,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TrainingErrorBound,
    PoolExhausted,
    MaxRounds,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::TrainingErrorBound => "training error within bound",
            StopReason::PoolExhausted => "pool exhausted",
            StopReason::MaxRounds => "round limit reached",
        })
    }
}
