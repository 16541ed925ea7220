//! Label sources.

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("unknown example id {0}")]
    UnknownId(usize),
    #[error("oracle did not answer before the deadline")]
    Timeout,
}

/// Something that labels examples. Every queried id is answered exactly
/// once, in query order.
pub trait Oracle {
    fn label(&mut self, ids: &[usize]) -> Result<Vec<usize>, OracleError>;
}

/// Answers immediately with ground truth.
#[derive(Clone, Debug)]
pub struct SimulatedOracle {
    dataset: Arc<Dataset>,
}

impl SimulatedOracle {
    pub fn new(dataset: Arc<Dataset>) -> Self {
        Self { dataset }
    }
}

impl Oracle for SimulatedOracle {
    fn label(&mut self, ids: &[usize]) -> Result<Vec<usize>, OracleError> {
        ids.iter().map(|&id| self.dataset.get(id).map(|e| e.true_label).ok_or(OracleError::UnknownId(id))).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnswerError {
    #[error("example {0} is not awaiting a label")]
    NotPending(usize),
    #[error("example {id} already labeled {existing}")]
    Conflict { id: usize, existing: usize },
}

#[derive(Default)]
struct Queue {
    /// Open queries: id -> answer so far.
    open: BTreeMap<usize, Option<usize>>,
}

#[derive(Default)]
struct Shared {
    queue: Mutex<Queue>,
    changed: Condvar,
}

/// An oracle that publishes its queries and blocks until they are answered
/// through a [`QueueHandle`] (typically by a person) or a deadline passes.
pub struct QueuedOracle {
    shared: Arc<Shared>,
    deadline: Duration,
}

/// The answering side of a [`QueuedOracle`]; cheap to clone and share.
#[derive(Clone)]
pub struct QueueHandle {
    shared: Arc<Shared>,
}

impl QueuedOracle {
    pub fn new(deadline: Duration) -> (Self, QueueHandle) {
        let shared = Arc::new(Shared::default());
        (Self { shared: shared.clone(), deadline }, QueueHandle { shared })
    }
}

impl Oracle for QueuedOracle {
    fn label(&mut self, ids: &[usize]) -> Result<Vec<usize>, OracleError> {
        let started = Instant::now();
        let mut queue = self.shared.queue.lock().expect("oracle queue poisoned");
        queue.open = ids.iter().map(|&id| (id, None)).collect();
        self.shared.changed.notify_all();
        loop {
            if queue.open.values().all(Option::is_some) {
                let answers = ids.iter().map(|id| queue.open[id].expect("all answered")).collect();
                queue.open.clear();
                return Ok(answers);
            }
            let remaining = self.deadline.saturating_sub(started.elapsed());
            if remaining.is_zero() {
                queue.open.clear();
                return Err(OracleError::Timeout);
            }
            queue = self.shared.changed.wait_timeout(queue, remaining).expect("oracle queue poisoned").0;
        }
    }
}

impl QueueHandle {
    /// Ids still awaiting an answer, ascending.
    pub fn pending(&self) -> Vec<usize> {
        let queue = self.shared.queue.lock().expect("oracle queue poisoned");
        queue.open.iter().filter(|(_, a)| a.is_none()).map(|(&id, _)| id).collect()
    }

    /// Blocks until at least one query is open or `timeout` passes.
    pub fn wait_for_queries(&self, timeout: Duration) -> Vec<usize> {
        let queue = self.shared.queue.lock().expect("oracle queue poisoned");
        let (queue, _) = self
            .shared
            .changed
            .wait_timeout_while(queue, timeout, |q| q.open.values().all(Option::is_some))
            .expect("oracle queue poisoned");
        queue.open.iter().filter(|(_, a)| a.is_none()).map(|(&id, _)| id).collect()
    }

    /// Records an answer. Returns `Ok(false)` when the same label was
    /// already recorded.
    pub fn answer(&self, id: usize, label: usize) -> Result<bool, AnswerError> {
        let mut queue = self.shared.queue.lock().expect("oracle queue poisoned");
        match queue.open.get_mut(&id) {
            None => Err(AnswerError::NotPending(id)),
            Some(Some(existing)) if *existing == label => Ok(false),
            Some(Some(existing)) => Err(AnswerError::Conflict { id, existing: *existing }),
            Some(slot) => {
                *slot = Some(label);
                self.shared.changed.notify_all();
                Ok(true)
            }
        }
    }
}
