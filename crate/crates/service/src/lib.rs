//! JSON-over-HTTP front of a [`LabelHub`]: lists pending queries, accepts
//! verdicts, reports run status, and serves the labeling UI's static files.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rlval_core::labeling::{LabelHub, RunStatus, SubmitError, WireQuery};
use rlval_core::Verdict;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

pub const DEFAULT_BIND: &str = "127.0.0.1:8791";

#[derive(Clone)]
struct AppState {
    hub: Arc<LabelHub>,
}

/// Routes for the labeling API, plus static files from `static_dir` at `/`.
pub fn router(hub: Arc<LabelHub>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queries", get(list_queries))
        .route("/api/labels", post(post_label))
        .route("/api/status", get(status))
        .route("/api/series/{id}/range", get(series_range))
        .with_state(AppState { hub });
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn error(code: StatusCode, message: String, field: Option<&str>) -> Response {
    let mut body = json!({ "error": message });
    if let Some(f) = field {
        body["field"] = json!(f);
    }
    (code, Json(body)).into_response()
}

async fn list_queries(State(app): State<AppState>) -> Json<Vec<WireQuery>> {
    Json(app.hub.pending())
}

async fn status(State(app): State<AppState>) -> Json<RunStatus> {
    Json(app.hub.status())
}

#[derive(Debug, Serialize)]
struct Ack {
    query_id: u64,
    verdict: Verdict,
    status: &'static str,
}

async fn post_label(State(app): State<AppState>, body: axum::body::Bytes) -> Response {
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed JSON body: {e}"), None),
    };
    let Some(query_id) = value.get("query_id").and_then(Value::as_u64) else {
        return error(
            StatusCode::BAD_REQUEST,
            "`query_id` must be a non-negative integer".into(),
            Some("query_id"),
        );
    };
    let Some(verdict) = value.get("verdict").and_then(Value::as_str).and_then(Verdict::parse) else {
        return error(
            StatusCode::BAD_REQUEST,
            "`verdict` must be \"anomaly\" or \"normal\"".into(),
            Some("verdict"),
        );
    };
    match app.hub.submit(query_id, verdict) {
        Ok(Ok(_)) => (
            StatusCode::OK,
            Json(Ack {
                query_id,
                verdict,
                status: "answered",
            }),
        )
            .into_response(),
        Ok(Err(e @ SubmitError::Unknown(_))) => error(StatusCode::NOT_FOUND, e.to_string(), None),
        Ok(Err(e @ SubmitError::Conflict(_))) => error(StatusCode::CONFLICT, e.to_string(), None),
        Err(e) => {
            log::error!("cannot record verdict for query {query_id}: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None)
        }
    }
}

#[derive(Debug, Deserialize)]
struct RangeParams {
    from: Option<usize>,
    to: Option<usize>,
}

async fn series_range(State(app): State<AppState>, Path(id): Path<String>, Query(p): Query<RangeParams>) -> Response {
    let from = p.from.unwrap_or(0);
    let to = p.to.unwrap_or(usize::MAX);
    if from > to {
        return error(StatusCode::BAD_REQUEST, format!("from {from} exceeds to {to}"), Some("from"));
    }
    match app.hub.series_range(&id, from, to) {
        Some(values) => {
            let to = from + values.len();
            Json(json!({ "series_id": id, "from": from, "to": to, "values": values })).into_response()
        }
        None => error(StatusCode::NOT_FOUND, format!("unknown series `{id}`"), None),
    }
}

/// Binds `addr` and serves until the process exits or the listener fails.
pub async fn serve(addr: SocketAddr, hub: Arc<LabelHub>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("labeling service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(hub, static_dir)).await
}

/// Binds `addr` now and serves on a background thread with its own
/// runtime. Returns the bound address.
pub fn spawn(addr: SocketAddr, hub: Arc<LabelHub>, static_dir: Option<PathBuf>) -> std::io::Result<SocketAddr> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let local = std_listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(1)
        .enable_all()
        .build()?;
    std::thread::Builder::new()
        .name("label-service".into())
        .spawn(move || {
            runtime.block_on(async move {
                match tokio::net::TcpListener::from_std(std_listener) {
                    Ok(listener) => {
                        if let Err(e) = axum::serve(listener, router(hub, static_dir)).await {
                            log::error!("labeling service stopped: {e}");
                        }
                    }
                    Err(e) => log::error!("labeling service cannot start: {e}"),
                }
            })
        })?;
    log::info!("labeling service listening on http://{local}");
    Ok(local)
}
