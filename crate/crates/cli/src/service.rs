//! JSON-over-HTTP inference for a single checkpoint.
//!
//! `POST /predict` takes `{"text": "...", "threshold": 0.5}` and answers with
//! per-token probabilities and labels. `POST /reload` re-reads the checkpoint
//! from disk and swaps it in; requests already running keep the snapshot they
//! started with.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gedtag::data::tokenize;
use gedtag::layers::{checkpoint, Model};
use gedtag::train::predict;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub checkpoint: PathBuf,
    /// Longest accepted text, in characters.
    pub max_length: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            checkpoint: PathBuf::from("model.ckpt"),
            max_length: 10_000,
        }
    }
}

impl ServeConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ServeConfig = toml::from_str(&text)
            .map_err(|e| gedtag::Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.max_length == 0 {
            return Err(gedtag::Error::Config("max_length must be positive".into()).into());
        }
        Ok(cfg)
    }

    pub fn addr(&self) -> anyhow::Result<SocketAddr> {
        let addr = format!("{}:{}", self.host, self.port);
        addr.parse()
            .map_err(|e| gedtag::Error::Config(format!("bad listen address {addr}: {e}")).into())
    }
}

/// A loaded checkpoint and the version string reported with every answer.
#[derive(Debug)]
pub struct Snapshot {
    pub model: Model,
    pub version: String,
}

impl Snapshot {
    pub fn from_bytes(bytes: &[u8]) -> gedtag::Result<Self> {
        let model = checkpoint::from_bytes(bytes)?;
        Ok(Snapshot {
            model,
            version: model_version(bytes),
        })
    }

    pub fn load(path: &Path) -> gedtag::Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// First 12 hex digits of the checkpoint's SHA-256.
pub fn model_version(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    checkpoint: PathBuf,
    max_length: usize,
}

impl AppState {
    pub fn new(snapshot: Snapshot, checkpoint: PathBuf, max_length: usize) -> Arc<Self> {
        Arc::new(AppState {
            current: RwLock::new(Arc::new(snapshot)),
            checkpoint,
            max_length,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Loads the checkpoint again and swaps it in. On failure the old
    /// snapshot stays.
    pub fn reload(&self) -> gedtag::Result<String> {
        let fresh = Arc::new(Snapshot::load(&self.checkpoint)?);
        let version = fresh.version.clone();
        *self.current.write().expect("snapshot lock poisoned") = fresh;
        Ok(version)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub text: String,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub tokens: Vec<String>,
    pub probs_incorrect: Vec<f64>,
    pub labels: Vec<u8>,
    pub model_version: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    // generous enough for max_length characters of 4-byte UTF-8 plus JSON
    let body_limit = state.max_length.saturating_mul(4).saturating_add(4096);
    Router::new()
        .route("/predict", post(predict_handler))
        .route("/reload", post(reload_handler))
        .route("/health", get(health_handler))
        .layer(DefaultBodyLimit::max(body_limit))
        .layer(middleware::from_fn(cors))
        .with_state(state)
}

/// The demo page may be served from another origin.
async fn cors(req: Request, next: Next) -> Response {
    let mut res = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    let h = res.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    res
}

async fn predict_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    if req.text.chars().count() > state.max_length {
        return error(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("text longer than {} characters", state.max_length),
        );
    }
    let threshold = req.threshold.unwrap_or(DEFAULT_THRESHOLD);
    if !threshold.is_finite() {
        return error(StatusCode::BAD_REQUEST, "threshold must be a finite number");
    }
    let tokens = tokenize(&req.text);
    if tokens.is_empty() {
        return error(StatusCode::BAD_REQUEST, "text contains no tokens");
    }
    let snapshot = state.snapshot();
    let result = tokio::task::spawn_blocking(move || {
        predict(&snapshot.model, &tokens, threshold).map(|p| PredictResponse {
            tokens,
            probs_incorrect: p.probs_incorrect,
            labels: p.labels,
            model_version: snapshot.version.clone(),
        })
    })
    .await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("inference task failed: {e}")),
    }
}

async fn reload_handler(State(state): State<Arc<AppState>>) -> Response {
    let st = state.clone();
    match tokio::task::spawn_blocking(move || st.reload()).await {
        Ok(Ok(version)) => {
            log::info!("reloaded {} (version {version})", state.checkpoint.display());
            Json(serde_json::json!({ "model_version": version })).into_response()
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload failed: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload task failed: {e}")),
    }
}

async fn health_handler(State(state): State<Arc<AppState>>) -> Response {
    Json(serde_json::json!({ "status": "ok", "model_version": state.snapshot().version })).into_response()
}

/// Serves until ctrl-c.
pub async fn serve(cfg: &ServeConfig) -> anyhow::Result<()> {
    let snapshot = Snapshot::load(&cfg.checkpoint)?;
    log::info!(
        "loaded {} ({} architecture, version {})",
        cfg.checkpoint.display(),
        snapshot.model.config().architecture,
        snapshot.version
    );
    let state = AppState::new(snapshot, cfg.checkpoint.clone(), cfg.max_length);
    let listener = tokio::net::TcpListener::bind(cfg.addr()?).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

