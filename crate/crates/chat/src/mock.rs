//! A scripted stand-in for a chat-completion endpoint, for tests and
//! offline demos. Replies are taken from a script in order, then from a
//! fallback; every request body is recorded.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::json;
use tokio::task::JoinHandle;

#[derive(Debug, Clone, PartialEq)]
pub enum MockReply {
    /// 200 with this assistant text.
    Text(String),
    /// 200 with "echo: " plus the last user message.
    Echo,
    /// An error status with an empty completion body.
    Status(u16),
    /// Wait, then answer with the inner reply.
    Delayed(Duration, Box<MockReply>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub body: Vec<u8>,
    pub authorization: Option<String>,
}

#[derive(Debug)]
struct MockState {
    script: Mutex<VecDeque<MockReply>>,
    fallback: MockReply,
    requests: Mutex<Vec<RecordedRequest>>,
}

#[derive(Debug)]
pub struct MockLlm {
    addr: SocketAddr,
    state: Arc<MockState>,
    task: JoinHandle<()>,
}

fn last_user(body: &[u8]) -> String {
    let v: serde_json::Value = serde_json::from_slice(body).unwrap_or_default();
    v["messages"]
        .as_array()
        .and_then(|ms| ms.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
        .to_string()
}

async fn answer(reply: MockReply, body: &[u8]) -> Response {
    let mut reply = reply;
    while let MockReply::Delayed(d, inner) = reply {
        tokio::time::sleep(d).await;
        reply = *inner;
    }
    let text = match reply {
        MockReply::Text(t) => t,
        MockReply::Echo => format!("echo: {}", last_user(body)),
        MockReply::Status(code) => {
            let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            return (status, Json(json!({"error": {"message": "scripted failure"}}))).into_response();
        }
        MockReply::Delayed(..) => unreachable!("delays unwrapped above"),
    };
    Json(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]})).into_response()
}

async fn completions(State(st): State<Arc<MockState>>, headers: HeaderMap, body: Bytes) -> Response {
    st.requests.lock().expect("mock poisoned").push(RecordedRequest {
        body: body.to_vec(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    });
    let next = st.script.lock().expect("mock poisoned").pop_front();
    answer(next.unwrap_or_else(|| st.fallback.clone()), &body).await
}

impl MockLlm {
    /// Listen on an ephemeral local port.
    pub async fn start(script: Vec<MockReply>, fallback: MockReply) -> std::io::Result<Self> {
        let state = Arc::new(MockState {
            script: Mutex::new(script.into()),
            fallback,
            requests: Mutex::new(Vec::new()),
        });
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(Self { addr, state, task })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.requests.lock().expect("mock poisoned").clone()
    }

    pub fn request_count(&self) -> usize {
        self.state.requests.lock().expect("mock poisoned").len()
    }
}

impl Drop for MockLlm {
    fn drop(&mut self) {
        self.task.abort();
    }
}
