//! HTTP JSON API over an [`AnnotationSession`], consumed by the labeling UI.
//!
//! | route | response |
//! |---|---|
//! | `GET /api/next?annotator=X[&skip=ID]` | task JSON, or 204 when exhausted |
//! | `POST /api/label` `{comment_id, code, annotator}` | quota progress |
//! | `POST /api/undo` `{annotator}` | reverted comment id and its restored label |
//! | `GET /api/progress` | per-label counts and targets |
//! | `GET /api/schema` | the seven labels with rubric text |
//! | `GET /api/export` | `text,code` CSV |

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::{AnnotationError, AnnotationSession};
use crate::labels;

pub type SharedSession = Arc<Mutex<AnnotationSession>>;

#[derive(Debug, Deserialize)]
struct NextParams {
    annotator: Option<String>,
    skip: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelRequest {
    pub comment_id: String,
    pub code: i64,
    pub annotator: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UndoRequest {
    pub annotator: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UndoResponse {
    pub comment_id: String,
    pub restored_code: Option<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: String,
    pub error: String,
}

impl IntoResponse for AnnotationError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            AnnotationError::NotInSample(_) => (StatusCode::NOT_FOUND, "NotInSample"),
            AnnotationError::InvalidLabel(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidLabel"),
            AnnotationError::MissingAnnotator => (StatusCode::BAD_REQUEST, "MissingAnnotator"),
            AnnotationError::NothingToUndo(_) => (StatusCode::CONFLICT, "NothingToUndo"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        let body = ApiError {
            kind: kind.to_string(),
            error: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

/// API routes, plus static UI assets from `static_dir` when given.
pub fn router(session: SharedSession, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/next", get(next))
        .route("/api/label", post(label))
        .route("/api/undo", post(undo))
        .route("/api/progress", get(progress))
        .route("/api/schema", get(schema))
        .route("/api/export", get(export))
        .with_state(session);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn next(State(session): State<SharedSession>, Query(p): Query<NextParams>) -> Response {
    let Some(annotator) = p.annotator.filter(|a| !a.trim().is_empty()) else {
        return AnnotationError::MissingAnnotator.into_response();
    };
    let mut s = session.lock().unwrap();
    if let Some(skip) = p.skip {
        if let Err(e) = s.skip(&skip, &annotator) {
            return e.into_response();
        }
    }
    match s.next_task(&annotator, Utc::now()) {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn label(State(session): State<SharedSession>, Json(req): Json<LabelRequest>) -> Response {
    let mut s = session.lock().unwrap();
    match s.record_label(&req.comment_id, req.code, &req.annotator, Utc::now()) {
        Ok(p) => Json(p).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn undo(State(session): State<SharedSession>, Json(req): Json<UndoRequest>) -> Response {
    let mut s = session.lock().unwrap();
    match s.undo_last(&req.annotator, Utc::now()) {
        Ok((comment_id, restored)) => Json(UndoResponse {
            comment_id,
            restored_code: restored.map(|l| l.code()),
        })
        .into_response(),
        Err(e) => e.into_response(),
    }
}

async fn progress(State(session): State<SharedSession>) -> Response {
    Json(session.lock().unwrap().progress()).into_response()
}

async fn schema() -> Response {
    Json(labels::schema()).into_response()
}

async fn export(State(session): State<SharedSession>) -> Response {
    let csv = session.lock().unwrap().export_training_set().to_csv();
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response()
}
