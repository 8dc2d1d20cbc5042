//! HTTP API for authoring sketches against stored scenes.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/scenes` | scene JSON | `201 {"id"}` |
//! | GET | `/scenes/{id}` | | scene JSON |
//! | GET | `/scenes/{id}/render` | | observation PNG |
//! | GET | `/scenes/{id}/depth` | | depth map as PFM |
//! | POST | `/scenes/{id}/execute` | `image/png` or stroke-list JSON | pipeline result JSON |
//!
//! Errors are `{"stage", "code", "message"}` with status 400, 404, 413, 415 or 422.

mod store;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use rovi_core::datagen::{render_strokes, StrokeList};
use rovi_core::io::{decode_png, encode_pfm, encode_png};
use rovi_core::pipeline::{run_episode, EpisodeReport, PipelineConfig, PipelineError, Stage};
use rovi_core::policy::TickRecord;
use rovi_core::simulator::{render, WorldState};
use rovi_core::viz::{trace_pixels, TracePixel};
use rovi_core::{Plan, RasterImage, SymbolSet};

pub use store::SceneStore;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub pipeline: PipelineConfig,
    /// Largest accepted request body.
    pub max_body_bytes: usize,
    /// Largest accepted decoded sketch, in pixels.
    pub max_image_pixels: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { pipeline: PipelineConfig::default(), max_body_bytes: 8 << 20, max_image_pixels: 4096 * 4096 }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SceneStore>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(store: SceneStore, config: ServiceConfig) -> Self {
        Self { store: Arc::new(store), config: Arc::new(config) }
    }
}

/// Everything the console needs to overlay one execution.
#[derive(Debug, Clone, Serialize)]
pub struct ExecuteResponse {
    pub symbols: SymbolSet,
    pub plan: Plan,
    pub trace: Vec<TickRecord<f64>>,
    pub trace_pixels: Vec<TracePixel>,
    pub report: EpisodeReport,
}

pub struct ApiError {
    status: StatusCode,
    error: PipelineError,
}

impl ApiError {
    fn new(status: StatusCode, stage: Stage, code: &str, message: impl std::fmt::Display) -> Self {
        Self { status, error: PipelineError::new(stage, code, message) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.error)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body_bytes(body: Result<Bytes, BytesRejection>) -> ApiResult<Bytes> {
    body.map_err(|r| {
        let status = r.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "PayloadTooLarge" } else { "InvalidBody" };
        ApiError::new(status, Stage::Input, code, r.body_text())
    })
}

fn scene(state: &AppState, id: &str) -> ApiResult<Arc<WorldState>> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, Stage::Input, "UnknownScene", format!("no scene {id:?}")))
}

async fn create_scene(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<Response> {
    let body = body_bytes(body)?;
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, Stage::Input, "InvalidScene", e))?;
    let cfg = &state.config.pipeline;
    let world = WorldState::from_json(text, &cfg.palette, cfg.parser.tolerance)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, Stage::Input, e.code(), e))?;
    let id = state
        .store
        .insert(world)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, Stage::Input, "StoreIo", e))?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "id": id }))).into_response())
}

async fn get_scene(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let world = scene(&state, &id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], world.to_json()).into_response())
}

async fn get_render(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let world = scene(&state, &id)?;
    let png = tokio::task::spawn_blocking(move || encode_png(&render(&world).image))
        .await
        .expect("render task panicked")
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, Stage::Input, "ImageIo", e))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn get_depth(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let world = scene(&state, &id)?;
    let pfm = tokio::task::spawn_blocking(move || encode_pfm(&render(&world).depth)).await.expect("render task panicked");
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], pfm).into_response())
}

fn is_json(headers: &HeaderMap) -> Option<bool> {
    let ct = headers.get(header::CONTENT_TYPE)?.to_str().ok()?.to_ascii_lowercase();
    if ct.starts_with("application/json") {
        Some(true)
    } else if ct.starts_with("image/png") || ct.starts_with("application/octet-stream") {
        Some(false)
    } else {
        None
    }
}

/// The sketch as a raster over the scene's render, whichever form it came in.
fn sketch_image(world: &WorldState, json: bool, body: &[u8], cfg: &ServiceConfig) -> ApiResult<RasterImage> {
    let bad = |code: &str, e: &dyn std::fmt::Display| ApiError::new(StatusCode::BAD_REQUEST, Stage::Input, code, e);
    if json {
        let strokes: StrokeList = serde_json::from_slice(body).map_err(|e| bad("InvalidStrokes", &e))?;
        let clean = render(world).image;
        let (img, _) = render_strokes(&clean, &strokes, &cfg.pipeline.palette)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, Stage::Input, e.code(), e))?;
        Ok(img)
    } else {
        // header first, so a huge image is refused before it is decoded
        let (w, h) = png_dimensions(body).ok_or_else(|| bad("ImageIo", &"not a PNG image"))?;
        if w as u64 * h as u64 > cfg.max_image_pixels {
            return Err(ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                Stage::Input,
                "ImageTooLarge",
                format!("{w}x{h} exceeds {} pixels", cfg.max_image_pixels),
            ));
        }
        decode_png(body).map_err(|e| bad("ImageIo", &e))
    }
}

fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    const SIG: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
    if bytes.len() < 24 || bytes[..8] != SIG || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let be = |o: usize| u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    Some((be(16), be(20)))
}

async fn execute(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<ExecuteResponse>> {
    let body = body_bytes(body)?;
    let world = scene(&state, &id)?;
    let json = is_json(&headers).ok_or_else(|| {
        ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            Stage::Input,
            "UnsupportedMediaType",
            "send image/png or application/json",
        )
    })?;
    let cfg = state.config.clone();
    tokio::task::spawn_blocking(move || {
        let img = sketch_image(&world, json, &body, &cfg)?;
        let ep = run_episode(&world, &img, &cfg.pipeline)
            .map_err(|e| ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, error: e })?;
        Ok(Json(ExecuteResponse {
            trace_pixels: trace_pixels(&world.camera, &ep.execution.trace),
            report: ep.report(),
            trace: ep.execution.trace.records,
            symbols: ep.symbols,
            plan: ep.plan,
        }))
    })
    .await
    .expect("execute task panicked")
}

pub fn app(state: AppState) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/scenes", post(create_scene))
        .route("/scenes/{id}", get(get_scene))
        .route("/scenes/{id}/render", get(get_render))
        .route("/scenes/{id}/depth", get(get_depth))
        .route("/scenes/{id}/execute", post(execute))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}
