use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rainfree::ErrorKind;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::error::CurationError;
use crate::job::{Decision, DensityClass};
use crate::service::Service;

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<title>rainfree curation</title>\n<p>No review UI is installed. The JSON API lives under <code>/api/jobs</code>.</p>\n";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    sequence_ref: PathBuf,
    density: DensityClass,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionRequest {
    decision: Decision,
}

enum ApiError {
    Curation(CurationError),
    BadRequest(String),
    Internal(String),
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        ApiError::Curation(e)
    }
}

pub fn status_for(e: &CurationError) -> StatusCode {
    match e {
        CurationError::NotFound(_) | CurationError::FrameOutOfRange { .. } => StatusCode::NOT_FOUND,
        CurationError::WrongState { .. } => StatusCode::CONFLICT,
        CurationError::InsufficientFrames { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        CurationError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
        CurationError::Core(e) => match e.kind() {
            ErrorKind::Input => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Parameter => StatusCode::BAD_REQUEST,
            ErrorKind::Environment => StatusCode::INTERNAL_SERVER_ERROR,
        },
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, tag, message) = match self {
            ApiError::Curation(e) => (status_for(&e), e.tag(), e.to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        };
        (status, Json(json!({ "error": tag, "message": message }))).into_response()
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

/// Runs a blocking service call off the async executor.
async fn blocking<T, F>(service: Service, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> crate::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn list_jobs(State(service): State<Service>) -> Result<Response, ApiError> {
    let jobs = blocking(service, |s| Ok(s.list_jobs())).await?;
    Ok(Json(jobs).into_response())
}

async fn create_job(State(service): State<Service>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let job = blocking(service, move |s| s.create_job(&req.sequence_ref, req.density)).await?;
    Ok((StatusCode::CREATED, Json(job)).into_response())
}

async fn get_job(State(service): State<Service>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = blocking(service, move |s| s.job(&id)).await?;
    Ok(Json(job).into_response())
}

async fn get_candidate(State(service): State<Service>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(png(blocking(service, move |s| s.get_candidate(&id)).await?))
}

async fn get_frame(
    State(service): State<Service>,
    Path((id, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let k: usize = file
        .strip_suffix(".png")
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| ApiError::Curation(CurationError::NotFound(format!("{id}/frame/{file}"))))?;
    Ok(png(blocking(service, move |s| s.get_frame_sample(&id, k)).await?))
}

async fn decide(
    State(service): State<Service>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: DecisionRequest = parse_body(&body)?;
    let job = blocking(service, move |s| s.decide(&id, req.decision)).await?;
    Ok(Json(job).into_response())
}

/// JSON API under `/api`, plus the review UI from `ui_dir` at `/` (a
/// placeholder page when no UI is installed).
pub fn router(service: Service, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/jobs", get(list_jobs).post(create_job))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/jobs/{id}/candidate.png", get(get_candidate))
        .route("/api/jobs/{id}/frame/{file}", get(get_frame))
        .route("/api/jobs/{id}/decision", post(decide))
        .with_state(service);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

/// Serves `router` on an already bound listener until the process stops.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}
