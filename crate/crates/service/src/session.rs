//! One labeling session: an engine paused at the oracle step.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use alearn::engine::{EngineError, RoundRecord, StopReason};
use alearn::{Dataset, Engine, RunConfig, RunTrace};
use serde::{Deserialize, Serialize};

use crate::image::{png_base64, to_gray};
use crate::ApiError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Answered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelTask {
    /// Equal to the example id; an example is queried at most once.
    pub task_id: usize,
    pub example_id: usize,
    pub round: usize,
    pub status: TaskStatus,
    pub width: usize,
    pub height: usize,
    /// 8-bit grayscale PNG, base64.
    pub png_base64: String,
    /// The same image as a row-major byte grid.
    pub pixels: Vec<u8>,
    pub class_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    /// The round awaiting labels, or the last round once finished.
    pub round: usize,
    pub labeled_count: usize,
    pub pool_remaining: usize,
    pub pending_task_count: usize,
    pub answered_task_count: usize,
    pub class_names: Vec<String>,
    pub latest: Option<RoundRecord>,
    pub stop_reason: Option<StopReason>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAnswer {
    pub task_id: usize,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    /// Newly recorded answers; repeats of an existing answer are not
    /// counted.
    pub accepted: usize,
    pub round_completed: bool,
    pub status: SessionStatus,
}

/// Read-only copy of everything the GET endpoints serve, replaced after
/// every mutation so reads never wait for training.
struct View {
    status: SessionStatus,
    tasks: Vec<LabelTask>,
    trace: RunTrace,
}

struct State {
    engine: Engine,
    /// Current query: example id -> answer so far.
    answers: BTreeMap<usize, Option<usize>>,
    /// Rendered images of the current query.
    images: HashMap<usize, (String, Vec<u8>)>,
}

pub struct Session {
    id: String,
    state: Mutex<State>,
    view: RwLock<Arc<View>>,
    snapshot_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    session_id: &'a str,
    trace: &'a RunTrace,
    /// `[example id, label]` for every labeled example, seed set included.
    labels: Vec<[usize; 2]>,
    /// Answers given so far for the open round.
    open_answers: Vec<[usize; 2]>,
}

fn engine_error(e: EngineError) -> ApiError {
    match e {
        EngineError::Config(_) | EngineError::Dataset(_) => ApiError::bad_request(e.to_string()),
        other => ApiError::internal(other.to_string()),
    }
}

impl Session {
    /// Builds the engine and runs the first round up to the oracle step.
    pub fn create(
        id: String,
        config: RunConfig,
        dataset: Arc<Dataset>,
        snapshot_dir: Option<PathBuf>,
    ) -> Result<Self, ApiError> {
        let engine = Engine::new(config, dataset).map_err(engine_error)?;
        let mut state = State { engine, answers: BTreeMap::new(), images: HashMap::new() };
        advance(&mut state).map_err(engine_error)?;
        let view = RwLock::new(Arc::new(render(&id, &state)));
        Ok(Self { id, state: Mutex::new(state), view, snapshot_dir })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        self.view.read().expect("view lock").status.clone()
    }

    /// Unanswered tasks of the open round, ascending by example id.
    pub fn queue(&self) -> Vec<LabelTask> {
        let view = self.view.read().expect("view lock").clone();
        view.tasks.iter().filter(|t| t.status == TaskStatus::Pending).cloned().collect()
    }

    pub fn trace(&self) -> RunTrace {
        self.view.read().expect("view lock").trace.clone()
    }

    /// Records a batch of answers atomically: either every answer is valid
    /// and applied, or nothing changes. Answering the last open task
    /// completes the round and runs the next one up to its query.
    pub fn submit(&self, batch: &[LabelAnswer]) -> Result<SubmitOutcome, ApiError> {
        let mut state = self.state.lock().expect("session lock");
        let classes = state.engine.dataset().num_classes();
        let queried: HashMap<usize, usize> = state
            .engine
            .records()
            .iter()
            .flat_map(|r| r.selected_ids.iter().copied().zip(r.selected_labels.iter().copied()))
            .collect();

        let mut fresh: BTreeMap<usize, usize> = BTreeMap::new();
        for a in batch {
            let existing = match state.answers.get(&a.task_id) {
                Some(open) => *open,
                None => match queried.get(&a.task_id) {
                    Some(&label) => Some(label),
                    None => return Err(ApiError::not_found(format!("no task {}", a.task_id))),
                },
            };
            if a.class >= classes {
                return Err(ApiError::unprocessable(format!("class {} out of range for {classes} classes", a.class)));
            }
            let earlier = existing.or_else(|| fresh.get(&a.task_id).copied());
            match earlier {
                Some(label) if label != a.class => {
                    return Err(ApiError::conflict(format!("task {} already labeled {label}", a.task_id)))
                }
                Some(_) => {}
                None => {
                    fresh.insert(a.task_id, a.class);
                }
            }
        }

        let accepted = fresh.len();
        for (id, class) in fresh {
            state.answers.insert(id, Some(class));
        }
        let complete = !state.answers.is_empty() && state.answers.values().all(Option::is_some);
        if complete {
            let labels: Vec<usize> = state.answers.values().map(|a| a.expect("all answered")).collect();
            state.engine.complete_round(&labels).map_err(engine_error)?;
            state.answers.clear();
            state.images.clear();
            advance(&mut state).map_err(engine_error)?;
        }
        let view = Arc::new(render(&self.id, &state));
        *self.view.write().expect("view lock") = view.clone();
        if complete {
            self.write_snapshot(&state, &view.trace)?;
        }
        Ok(SubmitOutcome { accepted, round_completed: complete, status: view.status.clone() })
    }

    fn write_snapshot(&self, state: &State, trace: &RunTrace) -> Result<(), ApiError> {
        let Some(dir) = &self.snapshot_dir else { return Ok(()) };
        let snapshot = Snapshot {
            session_id: &self.id,
            trace,
            labels: state.engine.labeled().iter().map(|(&id, &l)| [id, l]).collect(),
            open_answers: state.answers.iter().filter_map(|(&id, a)| a.map(|l| [id, l])).collect(),
        };
        let bytes = serde_json::to_vec_pretty(&snapshot).expect("snapshot serializes");
        let path = dir.join(format!("{}.json", self.id));
        let tmp = dir.join(format!("{}.json.tmp", self.id));
        std::fs::write(&tmp, bytes)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| ApiError::internal(format!("snapshot {}: {e}", path.display())))
    }
}

/// Runs rounds until one has a non-empty query or the run stops, then
/// renders that query's images.
fn advance(state: &mut State) -> Result<(), EngineError> {
    while !state.engine.is_finished() {
        let query = state.engine.begin_round()?.to_vec();
        if query.is_empty() {
            state.engine.complete_round(&[])?;
            continue;
        }
        let ds = state.engine.dataset().clone();
        let (width, height) = ds.image_shape().unwrap_or((ds.feature_dim(), 1));
        for &id in &query {
            let gray = to_gray(&ds.examples()[id].features);
            state.images.insert(id, (png_base64(width, height, &gray), gray));
            state.answers.insert(id, None);
        }
        break;
    }
    Ok(())
}

fn render(id: &str, state: &State) -> View {
    let engine = &state.engine;
    let ds = engine.dataset();
    let (width, height) = ds.image_shape().unwrap_or((ds.feature_dim(), 1));
    let round = if engine.is_finished() { engine.rounds_completed() } else { engine.rounds_completed() + 1 };
    let tasks: Vec<LabelTask> = state
        .answers
        .iter()
        .map(|(&example_id, answer)| {
            let (png, pixels) = state.images[&example_id].clone();
            LabelTask {
                task_id: example_id,
                example_id,
                round,
                status: if answer.is_some() { TaskStatus::Answered } else { TaskStatus::Pending },
                width,
                height,
                png_base64: png,
                pixels,
                class_names: ds.class_names().to_vec(),
            }
        })
        .collect();
    let pending = tasks.iter().filter(|t| t.status == TaskStatus::Pending).count();
    let status = SessionStatus {
        session_id: id.to_string(),
        round,
        labeled_count: engine.labeled().len(),
        pool_remaining: engine.pool().len(),
        pending_task_count: pending,
        answered_task_count: tasks.len() - pending,
        class_names: ds.class_names().to_vec(),
        latest: engine.records().last().cloned(),
        stop_reason: engine.stop_reason(),
    };
    View { status, tasks, trace: engine.trace() }
}
