#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use emllm_chat::mock::{MockLlm, MockReply};
use emllm_chat::{build_state, serve_on, ApiKey, ServerConfig};
use emllm_core::stress_net::{build_network, save_model, ArchConfig};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub const API_KEY: &str = "sk-test-7f3a9c2e5b1d";

pub fn write_model(path: &Path) {
    let rates = vec![("bvp".to_string(), 8.0), ("eda".to_string(), 4.0), ("temp".to_string(), 4.0)];
    let arch = ArchConfig::for_rates(&rates, 60.0).unwrap().with_hidden_units(4);
    save_model(&build_network(&arch, 7).unwrap(), path).unwrap();
}

pub struct Running {
    pub base: String,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<Result<(), emllm_chat::ChatError>>,
}

impl Running {
    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.task.await.unwrap().unwrap();
    }
}

pub struct Harness {
    pub dir: tempfile::TempDir,
    pub mock: MockLlm,
    pub cfg: ServerConfig,
    pub http: reqwest::Client,
}

impl Harness {
    pub async fn new(script: Vec<MockReply>, fallback: MockReply) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockLlm::start(script, fallback).await.unwrap();
        let model_path = dir.path().join("model.json");
        write_model(&model_path);
        let mut cfg = ServerConfig {
            bind: "127.0.0.1:0".into(),
            data_dir: dir.path().join("data"),
            model_path,
            ..Default::default()
        };
        cfg.llm.base_url = mock.base_url();
        cfg.llm.model = "mock".into();
        cfg.llm.api_key = Some(ApiKey::new(API_KEY));
        cfg.llm.backoff_ms = 1;
        Self {
            dir,
            mock,
            cfg,
            http: reqwest::Client::new(),
        }
    }

    pub async fn spawn(&self) -> Running {
        let state = Arc::new(build_state(&self.cfg).unwrap());
        let (listener, addr) = emllm_chat::server::bind(&self.cfg.bind).await.unwrap();
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(serve_on(listener, state, async {
            let _ = rx.await;
        }));
        Running {
            base: format!("http://{addr}"),
            stop: Some(tx),
            task,
        }
    }

    pub async fn create_session(&self, srv: &Running, name: &str) -> (String, String) {
        let v: serde_json::Value = self
            .http
            .post(format!("{}/api/session", srv.base))
            .json(&serde_json::json!({"user_name": name}))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        (v["session_id"].as_str().unwrap().to_string(), v["greeting"].as_str().unwrap().to_string())
    }

    pub async fn send(&self, srv: &Running, id: &str, text: &str) -> reqwest::Response {
        self.http
            .post(format!("{}/api/session/{id}/message", srv.base))
            .json(&serde_json::json!({"text": text}))
            .send()
            .await
            .unwrap()
    }

    pub async fn get_session_bytes(&self, srv: &Running, id: &str) -> Vec<u8> {
        let r = self.http.get(format!("{}/api/session/{id}", srv.base)).send().await.unwrap();
        assert_eq!(r.status(), 200);
        r.bytes().await.unwrap().to_vec()
    }

    /// Every file under the data directory, recursively.
    pub fn persisted_files(&self) -> Vec<(std::path::PathBuf, Vec<u8>)> {
        fn walk(dir: &Path, out: &mut Vec<(std::path::PathBuf, Vec<u8>)>) {
            for e in std::fs::read_dir(dir).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    walk(&p, out);
                } else {
                    out.push((p.clone(), std::fs::read(&p).unwrap()));
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.cfg.data_dir, &mut out);
        out
    }
}

pub fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}
