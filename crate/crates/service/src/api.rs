use std::path::PathBuf;
use std::sync::Arc;

use aas_core::Error;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::session::{Label, Session};

pub type SharedSession = Arc<Mutex<Session>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub query_id: u64,
    pub label: Label,
}

/// Core errors mapped onto HTTP statuses with a `{"error": ...}` body.
pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownQuery(_) => StatusCode::NOT_FOUND,
            Error::Contradiction(_) | Error::Finished => StatusCode::CONFLICT,
            Error::PendingQueries(_) => StatusCode::LOCKED,
            Error::RefreshTimeout { .. } => StatusCode::GATEWAY_TIMEOUT,
            Error::Invalid(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        let body = serde_json::json!({ "error": self.0.to_string() });
        (status, Json(body)).into_response()
    }
}

const PLACEHOLDER: &str = "<!doctype html>\n<title>annotation service</title>\n\
<p>The annotation API is under <code>/api</code>. Start the service with a UI \
directory to serve the front end here.</p>\n";

/// Routes under `/api`, plus either the static UI directory or a
/// placeholder page at `/`.
pub fn router(session: SharedSession, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(session_info))
        .route("/api/next-pair", get(next_pair))
        .route("/api/answer", post(answer))
        .route("/api/advance", post(advance))
        .route("/api/progress", get(progress))
        .with_state(session);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

async fn session_info(State(s): State<SharedSession>) -> impl IntoResponse {
    Json(s.lock().await.info())
}

async fn next_pair(State(s): State<SharedSession>) -> Response {
    match s.lock().await.next_pair() {
        Some(p) => Json(p).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn answer(
    State(s): State<SharedSession>,
    Json(req): Json<AnswerRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let receipt = s.lock().await.answer(req.query_id, req.label)?;
    Ok(Json(receipt))
}

async fn advance(State(s): State<SharedSession>) -> Result<impl IntoResponse, ApiError> {
    // Refinement and refresh can take a while; keep them off the reactor.
    let mut guard = s.lock_owned().await;
    let progress = tokio::task::spawn_blocking(move || guard.advance())
        .await
        .map_err(|e| ApiError(Error::Invalid(format!("advance task failed: {e}"))))??;
    Ok(Json(progress))
}

async fn progress(State(s): State<SharedSession>) -> impl IntoResponse {
    Json(s.lock().await.progress())
}
