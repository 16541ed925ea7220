//! HTTP labeling service.
//!
//! Each session runs the active learning loop with a person as the oracle:
//! the engine stops at the query step, publishes the selected examples as
//! label tasks, and resumes the round once every task has an answer.
//!
//! All routes live under `/v1` and speak JSON:
//!
//! | method | path                         |                                   |
//! |--------|------------------------------|-----------------------------------|
//! | POST   | `/v1/sessions`               | run config (+ `data`) -> 201      |
//! | GET    | `/v1/sessions`               | session ids                       |
//! | GET    | `/v1/sessions/{id}/status`   | counts, latest round, stop reason |
//! | GET    | `/v1/sessions/{id}/queue`    | pending tasks, ascending ids      |
//! | POST   | `/v1/sessions/{id}/labels`   | `[{task_id, class}]` -> accepted  |
//! | GET    | `/v1/sessions/{id}/trace`    | the run trace                     |

mod image;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use alearn::dataset::{BlobSpec, DataSpec};
use alearn::{Dataset, RunConfig};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub use image::{encode_png, png_base64, to_gray};
pub use session::{LabelAnswer, LabelTask, Session, SessionStatus, SubmitOutcome, TaskStatus};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
    pub fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }
    pub fn not_found(m: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, m)
    }
    pub fn conflict(m: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, m)
    }
    pub fn unprocessable(m: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, m)
    }
    pub fn internal(m: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, m)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Directory with the MNIST IDX files, for `{"kind": "mnist"}` data.
    pub mnist_dir: Option<PathBuf>,
    /// Used when a session request names no data.
    pub default_data: DataSpec,
    pub max_sessions: usize,
    /// Per-round JSON snapshots are written here when set.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            mnist_dir: None,
            default_data: DataSpec::Blobs(BlobSpec { classes: 3, dim: 16, per_class: 200, spread: 0.25, seed: 0 }),
            max_sessions: 16,
            snapshot_dir: None,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<BTreeMap<String, Arc<Session>>>,
    datasets: Mutex<HashMap<String, Arc<Dataset>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self { config, sessions: Mutex::default(), datasets: Mutex::default(), next_id: AtomicU64::new(1) })
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }

    fn dataset(&self, spec: &DataSpec) -> Result<Arc<Dataset>, ApiError> {
        let key = serde_json::to_string(spec).expect("data spec serializes");
        if let Some(ds) = self.datasets.lock().expect("dataset cache lock").get(&key) {
            return Ok(ds.clone());
        }
        let ds = Arc::new(
            spec.load(self.config.mnist_dir.as_deref()).map_err(|e| ApiError::bad_request(format!("data: {e}")))?,
        );
        self.datasets.lock().expect("dataset cache lock").insert(key, ds.clone());
        Ok(ds)
    }
}

/// Body of `POST /v1/sessions`: the run config fields plus optional data.
#[derive(Debug, Deserialize)]
struct CreateSession {
    #[serde(flatten)]
    config: RunConfig,
    #[serde(default)]
    data: Option<DataSpec>,
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    status: SessionStatus,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request: CreateSession =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid session request: {e}")))?;
    request.config.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    if app.sessions.lock().expect("sessions lock").len() >= app.config.max_sessions {
        return Err(ApiError::conflict(format!("session limit of {} reached", app.config.max_sessions)));
    }
    let worker = app.clone();
    let session = blocking(move || {
        let spec = request.data.unwrap_or_else(|| worker.config.default_data.clone());
        let dataset = worker.dataset(&spec)?;
        let id = format!("s{}", worker.next_id.fetch_add(1, Ordering::Relaxed));
        Session::create(id, request.config, dataset, worker.config.snapshot_dir.clone())
    })
    .await?;

    let mut sessions = app.sessions.lock().expect("sessions lock");
    if sessions.len() >= app.config.max_sessions {
        return Err(ApiError::conflict(format!("session limit of {} reached", app.config.max_sessions)));
    }
    let created = Created { session_id: session.id().to_string(), status: session.status() };
    sessions.insert(session.id().to_string(), Arc::new(session));
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(app.sessions.lock().expect("sessions lock").keys().cloned().collect())
}

async fn status(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionStatus>, ApiError> {
    Ok(Json(app.session(&id)?.status()))
}

async fn queue(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Vec<LabelTask>>, ApiError> {
    Ok(Json(app.session(&id)?.queue()))
}

async fn trace(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<alearn::RunTrace>, ApiError> {
    Ok(Json(app.session(&id)?.trace()))
}

async fn labels(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SubmitOutcome>, ApiError> {
    let session = app.session(&id)?;
    let answers: Vec<LabelAnswer> = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("expected [{{task_id, class}}]: {e}")))?;
    Ok(Json(blocking(move || session.submit(&answers)).await?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}/status", get(status))
        .route("/v1/sessions/{id}/queue", get(queue))
        .route("/v1/sessions/{id}/labels", post(labels))
        .route("/v1/sessions/{id}/trace", get(trace))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(config))).await
}
