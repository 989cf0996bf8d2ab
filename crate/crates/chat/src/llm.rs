//! Chat-completion client with retry and backoff.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{debug, warn};

use crate::error::ChatError;
use crate::session::Message;

/// Secret wrapper: never printed, never serialized.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<ApiKey>,
    pub timeout_s: f64,
    pub max_retries: usize,
    pub temperature: f64,
    /// Delay before the first retry; doubled for each further one.
    pub backoff_ms: u64,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model: "default".to_string(),
            api_key: None,
            timeout_s: 60.0,
            max_retries: 2,
            temperature: 0.7,
            backoff_ms: 500,
        }
    }
}

impl LlmEndpointConfig {
    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn validate(&self) -> Result<(), ChatError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ChatError::Config(format!("LLM base URL {:?} is not http(s)", self.base_url)));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ChatError::Config(format!("LLM timeout {} must be positive", self.timeout_s)));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ChatError::Config(format!("temperature {} is outside [0, 2]", self.temperature)));
        }
        Ok(())
    }
}

enum Attempt {
    Retry(ChatError),
    Fatal(ChatError),
}

#[derive(Debug, Clone)]
pub struct LlmClient {
    config: LlmEndpointConfig,
    http: reqwest::Client,
}

impl LlmClient {
    pub fn new(config: LlmEndpointConfig) -> Result<Self, ChatError> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| ChatError::Config(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.config
    }

    /// Request body for a message history.
    pub fn request_body(&self, history: &[Message]) -> serde_json::Value {
        let messages: Vec<_> = history
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.text}))
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        })
    }

    /// Send the history and return the assistant's reply. Server errors,
    /// connection failures and timeouts are retried up to `max_retries`
    /// times; 4xx responses are not.
    pub async fn complete(&self, history: &[Message]) -> Result<String, ChatError> {
        let body = self.request_body(history);
        let attempts = self.config.max_retries + 1;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = None;
        for attempt in 1..=attempts {
            match self.attempt(&body, attempt).await {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    warn!(attempt, error = %e, "LLM request failed");
                    last = Some(e);
                }
            }
            if attempt < attempts {
                tokio::time::sleep(delay).await;
                delay *= 2;
            }
        }
        Err(match last {
            Some(ChatError::Timeout { .. }) => ChatError::Timeout { attempts },
            Some(e) => ChatError::LlmUnavailable {
                attempts,
                detail: e.to_string(),
            },
            None => ChatError::LlmUnavailable {
                attempts,
                detail: "no attempt made".into(),
            },
        })
    }

    async fn attempt(&self, body: &serde_json::Value, attempt: usize) -> Result<String, Attempt> {
        let mut req = self.http.post(self.config.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key.expose());
        }
        debug!(attempt, "LLM request");
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Err(Attempt::Retry(ChatError::Timeout { attempts: attempt })),
            Err(e) => {
                return Err(Attempt::Retry(ChatError::LlmUnavailable {
                    attempts: attempt,
                    detail: e.without_url().to_string(),
                }))
            }
        };
        let status = resp.status();
        if status.is_server_error() {
            return Err(Attempt::Retry(ChatError::LlmUnavailable {
                attempts: attempt,
                detail: format!("status {status}"),
            }));
        }
        if !status.is_success() {
            let detail: String = resp.text().await.unwrap_or_default().chars().take(200).collect();
            return Err(Attempt::Fatal(ChatError::LlmRejected {
                status: status.as_u16(),
                detail,
            }));
        }
        let value: serde_json::Value = match resp.json().await {
            Ok(v) => v,
            Err(e) if e.is_timeout() => return Err(Attempt::Retry(ChatError::Timeout { attempts: attempt })),
            Err(e) => return Err(Attempt::Fatal(ChatError::BadResponse(e.without_url().to_string()))),
        };
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(ChatError::BadResponse("missing choices[0].message.content".into())))
    }
}
