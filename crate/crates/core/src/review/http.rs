use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use super::{DecisionRequest, ReviewError, ReviewStatus, ReviewStore};
use crate::error::{Error, Result};
use crate::supervise::write_label_records;
use crate::taxonomy::CoarseLabel;

#[derive(Clone)]
struct AppState {
    store: Arc<Mutex<ReviewStore>>,
    assets: Option<Arc<PathBuf>>,
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match self {
            ReviewError::NotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ReviewError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        error(status, self.to_string())
    }
}

#[derive(Deserialize)]
struct ItemsQuery {
    status: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn list_items(State(state): State<AppState>, Query(q): Query<ItemsQuery>) -> Response {
    let status = match q.status.as_deref().filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => match s.parse::<ReviewStatus>() {
            Ok(st) => Some(st),
            Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
        },
    };
    let store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    Json(store.page(status, q.offset.unwrap_or(0), q.limit.unwrap_or(50))).into_response()
}

async fn get_item(State(state): State<AppState>, UrlPath(span_id): UrlPath<String>) -> Response {
    let store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    match store.item(&span_id) {
        Some(item) => Json(item).into_response(),
        None => ReviewError::NotFound(span_id).into_response(),
    }
}

async fn post_decision(
    State(state): State<AppState>,
    UrlPath(span_id): UrlPath<String>,
    body: Result<Json<DecisionRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(request) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let mut store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    match store.record_decision(&span_id, request) {
        Ok(item) => Json(item).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn progress(State(state): State<AppState>) -> Response {
    let store = state.store.lock().unwrap_or_else(|e| e.into_inner());
    Json(store.progress()).into_response()
}

async fn export(State(state): State<AppState>) -> Response {
    let records = state.store.lock().unwrap_or_else(|e| e.into_inner()).export_gold();
    let mut body = Vec::new();
    if let Err(e) = write_label_records(&records, &mut body) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson; charset=utf-8")], body).into_response()
}

#[derive(Serialize)]
struct LabelInfo {
    tag: &'static str,
    group: &'static str,
    subject: &'static str,
}

async fn labels() -> Response {
    let labels: Vec<LabelInfo> = CoarseLabel::ALL
        .iter()
        .filter(|l| !l.is_artifact())
        .map(|l| LabelInfo {
            tag: l.tag(),
            group: l.group(),
            subject: l.subject(),
        })
        .collect();
    Json(labels).into_response()
}

const PLACEHOLDER_PAGE: &str = "<!doctype html><meta charset=utf-8><title>kompet review</title>\
<p>Review API is running. UI assets were not configured (pass --assets).</p>";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn static_asset(State(state): State<AppState>, uri: Uri) -> Response {
    let Some(root) = state.assets else {
        return ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER_PAGE).into_response();
    };
    let relative = Path::new(uri.path().trim_start_matches('/'));
    if relative.components().any(|c| !matches!(c, Component::Normal(_))) {
        return error(StatusCode::NOT_FOUND, "not found");
    }
    let mut path = root.join(relative);
    if relative.as_os_str().is_empty() || path.is_dir() {
        path = path.join("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        // single-page app: unknown paths fall back to the entry point
        Err(_) => match tokio::fs::read(root.join("index.html")).await {
            Ok(bytes) => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], bytes).into_response(),
            Err(_) => error(StatusCode::NOT_FOUND, "not found"),
        },
    }
}

pub fn router(store: Arc<Mutex<ReviewStore>>, assets: Option<PathBuf>) -> Router {
    let state = AppState {
        store,
        assets: assets.map(Arc::new),
    };
    Router::new()
        .route("/api/items", get(list_items))
        .route("/api/items/{span_id}", get(get_item))
        .route("/api/items/{span_id}/decision", post(post_decision))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .route("/api/labels", get(labels))
        .fallback(static_asset)
        .with_state(state)
}

/// Serve until ctrl-c.
pub async fn serve(store: ReviewStore, addr: SocketAddr, assets: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Network(format!("bind {addr}: {e}")))?;
    log::info!("review service listening on http://{}", listener.local_addr().map_err(|e| Error::Network(e.to_string()))?);
    axum::serve(listener, router(Arc::new(Mutex::new(store)), assets))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Network(e.to_string()))
}

/// A service running on a background thread; dropping the handle stops it.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Start the service on its own runtime thread. Bind to port 0 for an ephemeral port.
pub fn spawn(store: ReviewStore, addr: SocketAddr, assets: Option<PathBuf>) -> Result<ServerHandle> {
    let std_listener =
        std::net::TcpListener::bind(addr).map_err(|e| Error::Network(format!("bind {addr}: {e}")))?;
    std_listener
        .set_nonblocking(true)
        .map_err(|e| Error::Network(e.to_string()))?;
    let addr = std_listener.local_addr().map_err(|e| Error::Network(e.to_string()))?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(Arc::new(Mutex::new(store)), assets);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| Error::Network(e.to_string()))?;
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::from_std(std_listener) {
                Ok(l) => l,
                Err(e) => {
                    log::error!("review service: {e}");
                    return;
                }
            };
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
