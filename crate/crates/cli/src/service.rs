//! HTTP render service for the browser viewer.
//!
//! Routes:
//! - `GET /healthz` → `ok`
//! - `GET /api/meta` → key times, time range, FBB, dims, transfer function ids, limits
//! - `GET /api/transfer-functions` → the built-in transfer functions
//! - `POST /api/render` → PNG of a [`RenderRequest`]
//!
//! Errors are JSON `{"error": kind, "message": ..., "field"?: ..., "id"?: ...}`:
//! 400 for malformed or invalid requests, 413 for oversized images and 500
//! (with an id that is also logged to stderr) for internal failures.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::Semaphore;
use tvinr_core::feature::FeatureBoundingBox;
use tvinr_core::render::TransferFunction;

use crate::error::{CliError, ErrorKind};
use crate::scene::{RenderRequest, Scene, DEFAULT_MAX_PIXELS, TF_IDS};

/// Response header carrying the server-side render time.
pub const LATENCY_HEADER: &str = "x-render-latency-ms";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Limits {
    pub max_pixels: u64,
    pub max_body_bytes: usize,
    /// Renders running at once; further requests wait.
    pub max_concurrent_renders: usize,
    /// Whether times outside the key range are accepted (and clamped).
    pub extrapolate: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_pixels: DEFAULT_MAX_PIXELS,
            max_body_bytes: 64 * 1024,
            max_concurrent_renders: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4),
            extrapolate: false,
        }
    }
}

struct AppState {
    scene: Scene,
    limits: Limits,
    permits: Semaphore,
    next_error_id: AtomicU64,
}

#[derive(Serialize)]
struct Meta<'a> {
    key_times: &'a [f64],
    time_range: [f64; 2],
    fbb: &'a FeatureBoundingBox,
    dims: [usize; 3],
    num_frames: usize,
    epoch: usize,
    tf_ids: &'a [&'a str],
    limits: Limits,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorKind,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
}

fn status_of(kind: ErrorKind) -> StatusCode {
    match kind {
        ErrorKind::Config | ErrorKind::Argument | ErrorKind::FeatureNotFound => StatusCode::BAD_REQUEST,
        ErrorKind::TooLarge => StatusCode::PAYLOAD_TOO_LARGE,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Divergence | ErrorKind::Format | ErrorKind::Io | ErrorKind::Render => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl AppState {
    fn error_response(&self, err: &CliError) -> Response {
        let status = status_of(err.kind);
        let id = if status.is_server_error() {
            let id = self.next_error_id.fetch_add(1, Ordering::Relaxed) + 1;
            eprintln!("render error {id}: {}", err.to_json());
            Some(id)
        } else {
            None
        };
        let body = ErrorBody { error: err.kind, message: &err.message, field: err.field.as_deref(), id };
        (status, Json(body)).into_response()
    }
}

/// Builds the router around a loaded scene.
pub fn router(scene: Scene, limits: Limits) -> Router {
    let state = Arc::new(AppState {
        scene,
        limits,
        permits: Semaphore::new(limits.max_concurrent_renders.max(1)),
        next_error_id: AtomicU64::new(0),
    });
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/meta", get(meta))
        .route("/api/transfer-functions", get(transfer_functions))
        .route("/api/render", post(render_png))
        .layer(axum::middleware::map_response(allow_any_origin))
        .with_state(state)
}

async fn allow_any_origin(mut res: Response) -> Response {
    res.headers_mut().insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    res
}

async fn meta(State(state): State<Arc<AppState>>) -> Response {
    let s = &state.scene;
    let (lo, hi) = s.time_range();
    Json(Meta {
        key_times: &s.meta.key_times,
        time_range: [lo, hi],
        fbb: &s.fbb,
        dims: s.meta.dims,
        num_frames: s.meta.num_frames,
        epoch: s.meta.epoch,
        tf_ids: &TF_IDS,
        limits: state.limits,
    })
    .into_response()
}

#[derive(Serialize)]
struct NamedTf {
    id: &'static str,
    transfer_function: TransferFunction,
}

async fn transfer_functions() -> Json<Vec<NamedTf>> {
    Json(
        TF_IDS
            .iter()
            .map(|&id| NamedTf { id, transfer_function: TransferFunction::builtin(id).expect("built-in id") })
            .collect(),
    )
}

/// Parses a request body, naming the offending field on failure.
pub fn parse_request(body: &[u8]) -> Result<RenderRequest, CliError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let err = CliError::argument(format!("invalid render request: {}", e.inner()));
        if field == "." {
            err
        } else {
            err.with_field(field)
        }
    })
}

async fn render_png(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    if body.len() > state.limits.max_body_bytes {
        let err =
            CliError::new(ErrorKind::TooLarge, format!("request body exceeds {} bytes", state.limits.max_body_bytes));
        return state.error_response(&err);
    }
    let req = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return state.error_response(&e),
    };
    if let Err(e) = state.scene.check(&req, state.limits.max_pixels, state.limits.extrapolate) {
        return state.error_response(&e);
    }
    let _permit = state.permits.acquire().await.expect("semaphore is never closed");
    let worker = Arc::clone(&state);
    let start = Instant::now();
    let result = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, CliError> {
        let out = worker.scene.render(&req)?;
        Ok(out.image.encode_png()?)
    })
    .await;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(Ok(png)) => (
            [
                (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
                (
                    header::HeaderName::from_static(LATENCY_HEADER),
                    HeaderValue::from_str(&format!("{ms:.3}")).expect("ascii"),
                ),
            ],
            png,
        )
            .into_response(),
        Ok(Err(e)) => state.error_response(&e),
        Err(join) => state.error_response(&CliError::new(ErrorKind::Render, format!("render task failed: {join}"))),
    }
}

/// Serves until the process is stopped.
pub async fn serve(scene: Scene, limits: Limits, addr: &str) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::argument(format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr()?;
    eprintln!("listening on http://{local}");
    axum::serve(listener, router(scene, limits)).await?;
    Ok(())
}
