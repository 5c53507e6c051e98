use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::{ServeDir, ServeFile};

use crate::error::ServiceError;
use crate::service::{AnalyzeRequest, CorrectionRequest, Service};

const INDEX_PAGE: &str = include_str!("../data/index.html");

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::InvalidRequest(_) | ServiceError::InvalidCharacter(_) | ServiceError::FormatUnsupported(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::InvalidCorrection(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::SessionFinalized(_) => StatusCode::CONFLICT,
            ServiceError::ModelMissing(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::CorruptLog { .. } | ServiceError::Io(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": self.kind(), "message": self.to_string()});
        (self.status(), Json(body)).into_response()
    }
}

type Shared = State<Arc<Service>>;

/// Runs blocking model work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

/// JSON bodies that fail to deserialize become InvalidRequest errors.
fn body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::InvalidRequest(e.to_string()))
}

async fn analyze(State(svc): Shared, bytes: axum::body::Bytes) -> Result<Response, ServiceError> {
    let req: AnalyzeRequest = body(&bytes)?;
    let view = blocking(move || svc.analyze(&req)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn session(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let view = blocking(move || svc.session(&id)).await?;
    Ok(Json(view).into_response())
}

async fn correction(State(svc): Shared, Path(id): Path<String>, bytes: axum::body::Bytes) -> Result<Response, ServiceError> {
    let req: CorrectionRequest = body(&bytes)?;
    let view = blocking(move || svc.correct(&id, req)).await?;
    Ok(Json(view).into_response())
}

async fn finalize(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let view = blocking(move || svc.finalize(&id)).await?;
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(State(svc): Shared, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> Result<Response, ServiceError> {
    let format = q.format.unwrap_or_else(|| "conllu".into());
    let (format, doc) = blocking(move || svc.export(&id, &format)).await?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], doc).into_response())
}

#[derive(Deserialize)]
struct ChatRequest {
    #[serde(default)]
    message: String,
}

async fn chat(State(svc): Shared, bytes: axum::body::Bytes) -> Result<Response, ServiceError> {
    let req: ChatRequest = body(&bytes)?;
    Ok(Json(svc.chat(&req.message)).into_response())
}

async fn leaderboard(State(svc): Shared) -> Response {
    Json(svc.leaderboard.clone()).into_response()
}

async fn health(State(svc): Shared) -> Response {
    Json(svc.health()).into_response()
}

async fn unknown_api() -> ServiceError {
    ServiceError::InvalidRequest("no such endpoint".into())
}

pub fn router(svc: Arc<Service>) -> Router {
    let api = Router::new()
        .route("/api/analyze", post(analyze))
        .route("/api/session/{id}", get(session))
        .route("/api/session/{id}/correction", post(correction))
        .route("/api/session/{id}/finalize", post(finalize))
        .route("/api/session/{id}/export", get(export))
        .route("/api/chat", post(chat))
        .route("/api/leaderboard", get(leaderboard))
        .route("/api/health", get(health))
        .route("/api/{*rest}", get(unknown_api).post(unknown_api));
    let app = match &svc.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")))),
        None => api.route("/", get(|| async { Html(INDEX_PAGE) })),
    };
    app.with_state(svc)
}

pub async fn serve(svc: Arc<Service>, listen: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
