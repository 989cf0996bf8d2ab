//! HTTP API over the chat service and the stress monitor.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emllm_core::monitor::{Monitor, MonitorError, StressSummary, DEFAULT_MIN_EPISODE_WINDOWS};
use emllm_core::stress_net::load_model;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tracing::info;

use crate::chat::ChatService;
use crate::error::ChatError;
use crate::llm::{ApiKey, LlmClient, LlmEndpointConfig};
use crate::session::{ChatSession, Rating, SessionStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub model_path: PathBuf,
    pub llm: LlmEndpointConfig,
    pub shift_s: f64,
    pub min_episode_windows: usize,
    pub locale: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".to_string(),
            data_dir: PathBuf::from("data"),
            model_path: PathBuf::from("model.json"),
            llm: LlmEndpointConfig::default(),
            shift_s: 5.0,
            min_episode_windows: DEFAULT_MIN_EPISODE_WINDOWS,
            locale: "en".to_string(),
        }
    }
}

impl ServerConfig {
    /// Defaults overridden by the `EMLLM_*` environment variables.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(v) = var("EMLLM_LLM_URL") {
            self.llm.base_url = v;
        }
        if let Some(v) = var("EMLLM_LLM_MODEL") {
            self.llm.model = v;
        }
        if let Some(v) = var("EMLLM_LLM_KEY").filter(|v| !v.is_empty()) {
            self.llm.api_key = Some(ApiKey::new(v));
        }
        if let Some(v) = var("EMLLM_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = var("EMLLM_MODEL_PATH") {
            self.model_path = v.into();
        }
        if let Some(v) = var("EMLLM_BIND_ADDR") {
            self.bind = v;
        }
    }
}

#[derive(Debug)]
pub struct AppState {
    pub chat: ChatService,
    pub monitor: Mutex<Monitor>,
}

impl AppState {
    pub fn summary(&self) -> StressSummary {
        self.monitor.lock().expect("monitor poisoned").summary()
    }
}

/// Load the model, open the session store and build the LLM client.
pub fn build_state(cfg: &ServerConfig) -> Result<AppState, ChatError> {
    let model = load_model(&cfg.model_path)?;
    let monitor = Monitor::new(Arc::new(model), cfg.shift_s)?.with_min_episode_windows(cfg.min_episode_windows);
    let store = SessionStore::open(cfg.data_dir.join("sessions"))?;
    let chat = ChatService::new(store, LlmClient::new(cfg.llm.clone())?).with_locale(cfg.locale.clone());
    Ok(AppState {
        chat,
        monitor: Mutex::new(monitor),
    })
}

pub struct ApiError(pub ChatError);

impl From<ChatError> for ApiError {
    fn from(e: ChatError) -> Self {
        ApiError(e)
    }
}

impl From<MonitorError> for ApiError {
    fn from(e: MonitorError) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ChatError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            ChatError::EmptyMessage | ChatError::InvalidRating(_) => StatusCode::BAD_REQUEST,
            ChatError::Monitor(MonitorError::OutOfOrder { .. }) => StatusCode::CONFLICT,
            ChatError::Monitor(MonitorError::UnknownChannel(_) | MonitorError::NonFinite { .. }) => {
                StatusCode::BAD_REQUEST
            }
            ChatError::LlmUnavailable { .. } | ChatError::LlmRejected { .. } | ChatError::BadResponse(_) => {
                StatusCode::BAD_GATEWAY
            }
            ChatError::Timeout { .. } => StatusCode::GATEWAY_TIMEOUT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({"error": self.0.kind(), "message": self.0.to_string()});
        (status, Json(body)).into_response()
    }
}

type Shared = State<Arc<AppState>>;

#[derive(Debug, Deserialize)]
struct CreateSession {
    #[serde(default)]
    user_name: String,
}

#[derive(Debug, Deserialize)]
struct SendMessage {
    text: String,
}

#[derive(Debug, Deserialize)]
struct PushSamples {
    channel: String,
    samples: Vec<(f64, f64)>,
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn create_session(State(st): Shared, Json(req): Json<CreateSession>) -> Result<Json<serde_json::Value>, ApiError> {
    let summary = st.summary();
    let session = st.chat.create_session(&req.user_name, summary)?;
    let greeting = session.messages.last().map(|m| m.text.clone()).unwrap_or_default();
    Ok(Json(json!({"session_id": session.session_id, "greeting": greeting})))
}

async fn get_session(State(st): Shared, Path(id): Path<String>) -> Result<Json<ChatSession>, ApiError> {
    Ok(Json(st.chat.session(&id).await?))
}

async fn post_message(
    State(st): Shared,
    Path(id): Path<String>,
    Json(req): Json<SendMessage>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let reply = st.chat.send_message(&id, &req.text).await?;
    Ok(Json(json!({"assistant_text": reply})))
}

async fn post_rating(State(st): Shared, Path(id): Path<String>, Json(rating): Json<Rating>) -> Result<StatusCode, ApiError> {
    st.chat.rate(&id, rating).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn push_samples(State(st): Shared, Json(req): Json<PushSamples>) -> Result<Json<serde_json::Value>, ApiError> {
    // inference is CPU-bound; keep it off the async workers
    let accepted = tokio::task::spawn_blocking(move || {
        let mut monitor = st.monitor.lock().expect("monitor poisoned");
        let n = monitor.push(&req.channel, &req.samples)?;
        monitor.tick()?;
        Ok::<_, MonitorError>(n)
    })
    .await
    .map_err(|e| ChatError::Config(format!("inference task failed: {e}")))??;
    Ok(Json(json!({"accepted": accepted})))
}

async fn stress_summary(State(st): Shared) -> Json<StressSummary> {
    Json(st.summary())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/message", post(post_message))
        .route("/api/session/{id}/rating", post(post_rating))
        .route("/api/signals/push", post(push_samples))
        .route("/api/stress/summary", get(stress_summary))
        .with_state(state)
}

/// Serve on an already bound listener until `shutdown` resolves. In-flight
/// requests finish first; session logs are synced on every append.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ChatError> {
    let addr = listener.local_addr().map_err(|e| ChatError::io("listener", e))?;
    info!(%addr, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ChatError::io("server", e))?;
    info!("server stopped");
    Ok(())
}

pub async fn bind(addr: &str) -> Result<(TcpListener, SocketAddr), ChatError> {
    let listener = TcpListener::bind(addr).await.map_err(|e| ChatError::io(addr, e))?;
    let local = listener.local_addr().map_err(|e| ChatError::io(addr, e))?;
    Ok((listener, local))
}

pub async fn serve(cfg: ServerConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ChatError> {
    let state = Arc::new(build_state(&cfg)?);
    let (listener, _) = bind(&cfg.bind).await?;
    serve_on(listener, state, shutdown).await
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    info!("shutdown requested");
}
