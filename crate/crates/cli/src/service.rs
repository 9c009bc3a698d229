//! HTTP session API over the engine, detector and evaluator.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use layoutlab_core::backend::{BackendError, InpaintBackend};
use layoutlab_core::engine::{generate, EngineError, EngineOptions, Mode, OrderPolicy, Session};
use layoutlab_core::eval::{evaluate_run, shuffled_baseline, Detection, Detector};
use layoutlab_core::sampler::ManifestEntry;
use layoutlab_core::{ApParams, BBox, Canvas, EvalReport, Image, Layout, Region};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Step {
                source:
                    BackendError::Unavailable(_)
                    | BackendError::Timeout
                    | BackendError::Rejected { .. }
                    | BackendError::Protocol(_),
                ..
            } => StatusCode::BAD_GATEWAY,
            EngineError::OutputSize { .. } => StatusCode::BAD_GATEWAY,
            EngineError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn encode_image(img: &Image) -> Result<String, ApiError> {
    img.encode_png()
        .map(|b| STANDARD.encode(b))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

struct Entry {
    session: Session,
    last_used: Instant,
}

struct Inner {
    backend: Arc<dyn InpaintBackend>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
    ttl: Duration,
}

/// Shared service state: the backend and the session table.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(backend: Arc<dyn InpaintBackend>, ttl: Duration) -> Self {
        Self(Arc::new(Inner { backend, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1), ttl }))
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    /// Drops sessions idle for longer than the TTL.
    pub fn evict_idle(&self) -> usize {
        let now = Instant::now();
        let mut table = self.0.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let before = table.len();
        table.retain(|_, e| match e.try_lock() {
            Ok(entry) => now.duration_since(entry.last_used) <= self.0.ttl,
            Err(_) => true,
        });
        before - table.len()
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.evict_idle();
        let table = self.0.sessions.lock().unwrap_or_else(|p| p.into_inner());
        table.get(id).cloned().ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CreateSession {
    width: Option<u32>,
    height: Option<u32>,
    mode: Option<Mode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AddRequest {
    caption: String,
    #[serde(rename = "box")]
    bbox: BBox,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RemoveRequest {
    #[serde(rename = "box")]
    bbox: BBox,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StepView {
    pub step: usize,
    pub prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub image: String,
    pub objects: Vec<Region>,
    pub history: Vec<StepView>,
}

fn view(id: &str, s: &Session) -> Result<SessionView, ApiError> {
    Ok(SessionView {
        id: id.to_string(),
        image: encode_image(s.image())?,
        objects: s.objects().to_vec(),
        history: s.traces().map(|t| StepView { step: t.step_index, prompt: t.prompt.clone() }).collect(),
    })
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<SessionView> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) { CreateSession::default() } else { parse_body(&body)? };
    let w = req.width.unwrap_or(layoutlab_core::model::DEFAULT_CANVAS_SIDE);
    let h = req.height.unwrap_or(layoutlab_core::model::DEFAULT_CANVAS_SIDE);
    if w == 0 || h == 0 || w > 4096 || h > 4096 {
        return Err(ApiError::bad_request(format!("canvas {w}x{h} outside 1..=4096")));
    }
    state.evict_idle();
    let session = Session::new(Canvas::new(w, h)).with_mode(req.mode.unwrap_or_default());
    let id = format!("s{}", state.0.next_id.fetch_add(1, Ordering::Relaxed));
    let v = view(&id, &session)?;
    let entry = Arc::new(Mutex::new(Entry { session, last_used: Instant::now() }));
    state.0.sessions.lock().unwrap_or_else(|p| p.into_inner()).insert(id, entry);
    Ok(Json(v))
}

/// Runs `f` on the session off the async runtime, holding its lock.
async fn with_session<T, F>(state: &AppState, id: String, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session, &dyn InpaintBackend) -> Result<T, ApiError> + Send + 'static,
{
    let entry = state.lookup(&id)?;
    let backend = Arc::clone(&state.0.backend);
    tokio::task::spawn_blocking(move || {
        let mut guard = entry.lock().unwrap_or_else(|p| p.into_inner());
        guard.last_used = Instant::now();
        f(&mut guard.session, backend.as_ref())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map(Json)
}

async fn add(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<SessionView> {
    let req: AddRequest = parse_body(&body)?;
    let sid = id.clone();
    with_session(&state, id, move |s, be| {
        s.add(&req.caption, req.bbox, be)?;
        view(&sid, s)
    })
    .await
}

async fn remove(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<SessionView> {
    let req: RemoveRequest = parse_body(&body)?;
    let sid = id.clone();
    with_session(&state, id, move |s, be| {
        s.remove(req.bbox, be)?;
        view(&sid, s)
    })
    .await
}

async fn undo(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let sid = id.clone();
    with_session(&state, id, move |s, _| {
        s.undo()?;
        view(&sid, s)
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageView {
    pub image: String,
}

async fn image(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<ImageView> {
    with_session(&state, id, |s, _| Ok(ImageView { image: encode_image(s.image())? })).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    layout: Layout,
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    order: OrderPolicy,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeneratedStep {
    pub step: usize,
    pub prompt: String,
    pub image: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateView {
    pub image: String,
    pub steps: Vec<GeneratedStep>,
}

async fn generate_layout(State(state): State<AppState>, body: Bytes) -> ApiResult<GenerateView> {
    let req: GenerateRequest = parse_body(&body)?;
    let backend = Arc::clone(&state.0.backend);
    tokio::task::spawn_blocking(move || {
        let opts = EngineOptions { mode: req.mode, order: req.order, ..EngineOptions::default() };
        let (img, trace) = generate(&req.layout, backend.as_ref(), &opts)?;
        let steps = trace
            .iter()
            .map(|t| Ok(GeneratedStep { step: t.step_index, prompt: t.prompt.clone(), image: encode_image(&t.committed)? }))
            .collect::<Result<_, ApiError>>()?;
        Ok(GenerateView { image: encode_image(&img)?, steps })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map(Json)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    manifest: Vec<ManifestEntry>,
    #[serde(default)]
    detections: Vec<Detection>,
    /// Base64 PNGs keyed by image id, scored with the built-in detector.
    #[serde(default)]
    images: HashMap<String, String>,
    #[serde(default)]
    shuffled: bool,
    #[serde(default)]
    seed: u64,
}

async fn evaluate(body: Bytes) -> ApiResult<EvalReport> {
    let req: EvaluateRequest = parse_body(&body)?;
    tokio::task::spawn_blocking(move || {
        let mut dets = req.detections;
        let detector = Detector::default();
        for (id, b64) in &req.images {
            let bytes = STANDARD.decode(b64).map_err(|e| ApiError::bad_request(format!("image {id}: {e}")))?;
            let img = Image::decode_png(&bytes).map_err(|e| ApiError::bad_request(format!("image {id}: {e}")))?;
            dets.extend(detector.detect(id, &img));
        }
        let params = ApParams::default();
        let report = if req.shuffled {
            shuffled_baseline(&req.manifest, &dets, req.seed, &params)
        } else {
            evaluate_run(&req.manifest, &dets, &params)
        };
        report.map_err(|e| ApiError::bad_request(e.to_string()))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/add", post(add))
        .route("/session/{id}/remove", post(remove))
        .route("/session/{id}/undo", post(undo))
        .route("/session/{id}/image", get(image))
        .route("/generate", post(generate_layout))
        .route("/evaluate", post(evaluate))
        .with_state(state)
}

/// Serves until the process is interrupted, sweeping idle sessions.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = sweeper.evict_idle();
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
