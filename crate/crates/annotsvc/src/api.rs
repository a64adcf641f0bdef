//! HTTP+JSON front end. Errors are `{code, message, details}` objects.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use crate::store::{StoreError, TaskStore};
use crate::task::{AnnotationTask, TaskState};

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

pub struct Failure(StatusCode, ApiError);

impl Failure {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, details: Value) -> Self {
        Self(
            status,
            ApiError {
                code: code.into(),
                message: message.into(),
                details,
            },
        )
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::UnknownTask(id) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_task", message, json!({ "task_id": id }))
            }
            StoreError::EmptyWorker => Self::new(StatusCode::BAD_REQUEST, "bad_request", message, Value::Null),
            StoreError::LeaseMismatch { task_id, holder, .. } => Self::new(
                StatusCode::CONFLICT,
                "lease_mismatch",
                message,
                json!({ "task_id": task_id, "holder": holder }),
            ),
            StoreError::InvalidState { task_id, state, .. } => Self::new(
                StatusCode::CONFLICT,
                "invalid_state",
                message,
                json!({ "task_id": task_id, "state": state }),
            ),
            StoreError::TurnCount { expected, got, .. } => Self::new(
                StatusCode::BAD_REQUEST,
                "turn_count",
                message,
                json!({ "expected": expected, "got": got }),
            ),
            StoreError::Rejected(turns) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "validation_failed",
                message,
                json!({ "turns": turns }),
            ),
            StoreError::MissingSnapshot { .. }
            | StoreError::Io { .. }
            | StoreError::Corrupt { .. }
            | StoreError::CorruptSnapshot { .. } => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", message, Value::Null)
            }
        }
    }
}

type Store = Arc<TaskStore>;

#[derive(Debug, Deserialize)]
struct NextQuery {
    worker: Option<String>,
}

/// `task` is null when nothing is open.
#[derive(Debug, Serialize, Deserialize)]
pub struct NextResponse {
    pub task: Option<AnnotationTask>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub worker_id: String,
    pub paraphrases: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub task_id: String,
    pub state: TaskState,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FlagRequest {
    pub worker_id: String,
    #[serde(default)]
    pub reason: String,
}

/// Store calls take a blocking lock and may fsync, so they run off the
/// async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> Result<T, Failure> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(Failure::from),
        Err(e) => Err(Failure::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            e.to_string(),
            Value::Null,
        )),
    }
}

async fn next_task(State(store): State<Store>, Query(q): Query<NextQuery>) -> Result<Json<NextResponse>, Failure> {
    let worker = q.worker.filter(|w| !w.trim().is_empty()).ok_or_else(|| {
        Failure::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            "missing worker parameter",
            Value::Null,
        )
    })?;
    let task = blocking(move || store.next_task(&worker)).await?;
    Ok(Json(NextResponse { task }))
}

async fn get_task(State(store): State<Store>, Path(id): Path<String>) -> Result<Json<AnnotationTask>, Failure> {
    store
        .task(&id)
        .map(Json)
        .ok_or_else(|| StoreError::UnknownTask(id).into())
}

async fn submit(
    State(store): State<Store>,
    Path(id): Path<String>,
    Json(req): Json<SubmitRequest>,
) -> Result<Json<SubmitResponse>, Failure> {
    let task_id = id.clone();
    let state = blocking(move || store.submit(&id, &req.worker_id, req.paraphrases)).await?;
    Ok(Json(SubmitResponse { task_id, state }))
}

async fn approve(State(store): State<Store>, Path(id): Path<String>) -> Result<Json<SubmitResponse>, Failure> {
    let task_id = id.clone();
    blocking(move || store.approve(&id)).await?;
    Ok(Json(SubmitResponse {
        task_id,
        state: TaskState::Approved,
    }))
}

async fn reject(
    State(store): State<Store>,
    Path(id): Path<String>,
    Json(req): Json<FlagRequest>,
) -> Result<Json<Value>, Failure> {
    let task_id = id.clone();
    blocking(move || store.flag(&id, &req.worker_id, &req.reason)).await?;
    Ok(Json(json!({ "task_id": task_id, "flagged": true })))
}

async fn progress(State(store): State<Store>) -> impl IntoResponse {
    Json(store.progress())
}

async fn overlay(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, Failure> {
    store.overlay(&id).map(Json).ok_or_else(|| {
        Failure::new(
            StatusCode::NOT_FOUND,
            "unknown_snapshot",
            format!("unknown snapshot {id}"),
            json!({ "snapshot_id": id }),
        )
    })
}

async fn not_found() -> Failure {
    Failure::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint", Value::Null)
}

/// API routes; with `ui_dir`, every other path is served from that directory.
pub fn router(store: Arc<TaskStore>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/tasks/next", get(next_task))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/submit", post(submit))
        .route("/tasks/{id}/approve", post(approve))
        .route("/tasks/{id}/reject", post(reject))
        .route("/progress", get(progress))
        .route("/snapshot/{id}/overlay", get(overlay))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.fallback(not_found),
    }
}

/// Serves `router` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    router: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}
