use emllm_chat::ChatError;
use emllm_core::monitor::MonitorError;
use emllm_core::signal_store::SignalError;
use emllm_core::stress_net::ModelError;
use emllm_core::synthgen::SynthError;
use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Signal(s) => s.into(),
            ModelError::Diverged { .. } | ModelError::Tensor(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => CliError::Data(e.to_string()),
            SynthError::Io { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<MonitorError> for CliError {
    fn from(e: MonitorError) -> Self {
        match e {
            MonitorError::Model(m) => m.into(),
            MonitorError::Signal(s) => s.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ChatError> for CliError {
    fn from(e: ChatError) -> Self {
        match e {
            ChatError::Model(m) => m.into(),
            ChatError::Monitor(m) => m.into(),
            ChatError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
