//! HTTP front end over a loaded [`Engine`].
//!
//! `POST /api/query` returns one page of results with the query graph,
//! `GET /api/export` streams every result as TSV and `GET /api/health`
//! reports load state. The router is usable before the index finishes
//! loading; until [`AppState::install`] is called every endpoint except
//! health answers 503.

use std::convert::Infallible;
use std::sync::{Arc, OnceLock};

use axum::body::{Body, Bytes};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use depsearch_core::builder::{GraphView, QueryGraph};
use depsearch_core::corpus::Span;
use depsearch_core::engine::{Engine, QueryFailure, Total};
use depsearch_core::export::{tsv_header, tsv_row};
use depsearch_core::matcher::MatchResult;
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Semaphore};
use tower_http::cors::{Any, CorsLayer};

#[derive(Clone, Debug)]
pub struct Config {
    pub default_page_size: usize,
    pub max_page_size: usize,
    /// Upper bound on `limit` for exports; `None` allows full exports.
    pub max_export_rows: Option<usize>,
    /// Concurrent calls to the parse provider.
    pub provider_slots: usize,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            default_page_size: 50,
            max_page_size: 500,
            max_export_rows: None,
            provider_slots: 8,
            cors_origin: None,
        }
    }
}

struct Shared {
    engine: OnceLock<Engine>,
    provider_slots: Semaphore,
    config: Config,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// State with no index yet.
    pub fn loading(config: Config) -> Self {
        AppState(Arc::new(Shared {
            engine: OnceLock::new(),
            provider_slots: Semaphore::new(config.provider_slots.max(1)),
            config,
        }))
    }

    pub fn ready(engine: Engine, config: Config) -> Self {
        let state = Self::loading(config);
        state.install(engine);
        state
    }

    /// Makes the engine visible to requests. Later calls are ignored.
    pub fn install(&self, engine: Engine) {
        if self.0.engine.set(engine).is_err() {
            log::warn!("engine already installed");
        }
    }

    pub fn is_ready(&self) -> bool {
        self.0.engine.get().is_some()
    }

    fn engine(&self) -> Result<&Engine, ApiError> {
        self.0.engine.get().ok_or_else(|| ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            kind: "Loading".into(),
            position: None,
            message: "index is still loading".into(),
        })
    }

    async fn compile(&self, query: String) -> Result<QueryGraph, ApiError> {
        let engine = self.engine()?.clone();
        let _permit = self
            .0
            .provider_slots
            .acquire()
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?;
        tokio::task::spawn_blocking(move || engine.compile(&query))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(ApiError::from)
    }
}

pub fn router(state: AppState) -> Router {
    let cors = match &state.0.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {origin:?}");
                CorsLayer::new().allow_origin(Any)
            }
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    Router::new()
        .route("/api/query", post(query))
        .route("/api/export", get(export))
        .route("/api/health", get(health))
        .layer(cors)
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error_kind: String,
    position: Option<usize>,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub position: Option<usize>,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            kind: "InvalidRequest".into(),
            position: None,
            message: message.into(),
        }
    }

    fn internal(message: String) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "InternalError".into(),
            position: None,
            message,
        }
    }
}

impl From<QueryFailure> for ApiError {
    fn from(e: QueryFailure) -> Self {
        let kind = e.kind();
        let status = match kind {
            "ProviderUnavailable" => StatusCode::BAD_GATEWAY,
            "AlignmentError" => StatusCode::UNPROCESSABLE_ENTITY,
            _ if e.is_user_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            kind: kind.into(),
            position: e.position(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error_kind: self.kind,
            position: self.position,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    pub query: String,
    #[serde(default)]
    pub page: usize,
    pub page_size: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct QueryResponse {
    pub graph: GraphView,
    pub total_estimate: Total,
    pub results: Vec<ResultView>,
    pub truncated_sentences: usize,
}

#[derive(Debug, Serialize)]
pub struct ResultView {
    pub sentence_id: String,
    pub text: String,
    pub captures: Vec<CaptureView>,
}

#[derive(Debug, Serialize)]
pub struct CaptureView {
    pub name: String,
    pub span: Span,
    pub text: String,
}

impl From<MatchResult> for ResultView {
    fn from(m: MatchResult) -> Self {
        ResultView {
            sentence_id: m.sentence_id,
            text: m.text,
            captures: m
                .captures
                .into_iter()
                .map(|c| CaptureView {
                    name: c.name,
                    span: c.span,
                    text: c.text,
                })
                .collect(),
        }
    }
}

async fn query(
    State(state): State<AppState>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let config = &state.0.config;
    let page_size = req.page_size.unwrap_or(config.default_page_size);
    if !(1..=config.max_page_size).contains(&page_size) {
        return Err(ApiError::bad_request(format!(
            "page_size must be between 1 and {}",
            config.max_page_size
        )));
    }
    let graph = state.compile(req.query).await?;
    let engine = state.engine()?.clone();
    let page = req.page;
    tokio::task::spawn_blocking(move || {
        let p = engine.page(&graph, page, page_size);
        QueryResponse {
            graph: graph.view(),
            total_estimate: p.total,
            results: p.results.into_iter().map(ResultView::from).collect(),
            truncated_sentences: p.truncated_sentences,
        }
    })
    .await
    .map(Json)
    .map_err(|e| ApiError::internal(e.to_string()))
}

#[derive(Debug, Deserialize)]
pub struct ExportParams {
    pub query: String,
    pub limit: Option<usize>,
}

async fn export(
    State(state): State<AppState>,
    params: Result<Query<ExportParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(params) = params.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if params.limit == Some(0) {
        return Err(ApiError::bad_request("limit must be at least 1"));
    }
    let limit = match (params.limit, state.0.config.max_export_rows) {
        (Some(l), Some(max)) => Some(l.min(max)),
        (l, max) => l.or(max),
    };
    let graph = state.compile(params.query).await?;
    let engine = state.engine()?.clone();

    let (tx, rx) = mpsc::channel::<Bytes>(16);
    tokio::task::spawn_blocking(move || {
        let mut chunk = tsv_header(&graph);
        chunk.push('\n');
        let rows = engine.stream(&graph).take(limit.unwrap_or(usize::MAX));
        for r in rows {
            chunk.push_str(&tsv_row(&r));
            chunk.push('\n');
            if chunk.len() >= 16 * 1024 {
                let full = std::mem::take(&mut chunk);
                if tx.blocking_send(Bytes::from(full)).is_err() {
                    return;
                }
            }
        }
        if !chunk.is_empty() {
            let _ = tx.blocking_send(Bytes::from(chunk));
        }
    });
    let stream = futures_util::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, Infallible>(b), rx))
    });
    Ok((
        [
            (header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"results.tsv\""),
        ],
        Body::from_stream(stream),
    )
        .into_response())
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    corpus_sentences: Option<usize>,
    index_version: Option<u32>,
}

async fn health(State(state): State<AppState>) -> (StatusCode, Json<Health>) {
    match state.0.engine.get() {
        Some(engine) => (
            StatusCode::OK,
            Json(Health {
                status: "ok",
                corpus_sentences: Some(engine.index().len()),
                index_version: Some(engine.index().version()),
            }),
        ),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(Health {
                status: "loading",
                corpus_sentences: None,
                index_version: None,
            }),
        ),
    }
}
