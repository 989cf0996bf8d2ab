use std::path::PathBuf;

use emllm_core::monitor::MonitorError;
use emllm_core::stress_net::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("message text is empty")]
    EmptyMessage,
    #[error("invalid rating: {0}")]
    InvalidRating(String),
    #[error("language model unavailable after {attempts} attempts: {detail}")]
    LlmUnavailable { attempts: usize, detail: String },
    #[error("language model rejected the request with status {status}: {detail}")]
    LlmRejected { status: u16, detail: String },
    #[error("language model timed out after {attempts} attempts")]
    Timeout { attempts: usize },
    #[error("unexpected language model response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session log: {0}")]
    Json(#[from] serde_json::Error),
}

impl ChatError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ChatError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ChatError::SessionNotFound(_) => "SessionNotFound",
            ChatError::EmptyMessage => "EmptyMessage",
            ChatError::InvalidRating(_) => "InvalidRating",
            ChatError::LlmUnavailable { .. } => "LlmUnavailable",
            ChatError::LlmRejected { .. } => "LlmRejected",
            ChatError::Timeout { .. } => "Timeout",
            ChatError::BadResponse(_) => "BadResponse",
            ChatError::Monitor(MonitorError::OutOfOrder { .. }) => "OutOfOrder",
            ChatError::Monitor(MonitorError::UnknownChannel(_)) => "UnknownChannel",
            ChatError::Monitor(MonitorError::NonFinite { .. }) => "NonFinite",
            ChatError::Monitor(_) => "MonitorError",
            ChatError::Model(_) => "ModelError",
            ChatError::Config(_) => "Config",
            ChatError::Io { .. } => "Io",
            ChatError::Json(_) => "Json",
        }
    }
}
