use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use emllm_core::monitor::StressSummary;
use tokio::sync::Mutex as AsyncMutex;
use tracing::{info, warn};

use crate::error::ChatError;
use crate::llm::LlmClient;
use crate::prompt::{build_system_prompt, greeting, PromptContext};
use crate::session::{ChatSession, Message, Rating, Role, SessionEvent, SessionStore};

type SessionHandle = Arc<AsyncMutex<ChatSession>>;

/// Sessions, their logs and the LLM client.
///
/// Each session has its own async lock held for the whole of a send, so
/// messages within a session are strictly ordered while other sessions
/// proceed independently.
#[derive(Debug)]
pub struct ChatService {
    store: SessionStore,
    llm: LlmClient,
    locale: String,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl ChatService {
    pub fn new(store: SessionStore, llm: LlmClient) -> Self {
        Self {
            store,
            llm,
            locale: "en".to_string(),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_locale(mut self, locale: impl Into<String>) -> Self {
        self.locale = locale.into();
        self
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    /// Open a session: system prompt, then the templated greeting.
    pub fn create_session(&self, user_name: &str, summary: StressSummary) -> Result<ChatSession, ChatError> {
        let mut ctx = PromptContext::new(user_name.trim(), summary);
        ctx.locale = self.locale.clone();
        let mut session = self.store.create(ctx)?;
        let system = Message::new(Role::System, build_system_prompt(&session.context));
        self.store.record(&mut session, SessionEvent::Message { message: system })?;
        let hello = Message::new(Role::Assistant, greeting(&session.context));
        self.store.record(&mut session, SessionEvent::Message { message: hello })?;
        info!(session_id = %session.session_id, "session created");
        self.sessions
            .lock()
            .expect("session table poisoned")
            .insert(session.session_id.clone(), Arc::new(AsyncMutex::new(session.clone())));
        Ok(session)
    }

    fn handle(&self, session_id: &str) -> Result<SessionHandle, ChatError> {
        let mut table = self.sessions.lock().expect("session table poisoned");
        if let Some(h) = table.get(session_id) {
            return Ok(h.clone());
        }
        let loaded = self.store.load(session_id)?;
        if let Some(line) = loaded.truncated_at {
            warn!(session_id, line, "resuming a truncated session log");
        }
        let h = Arc::new(AsyncMutex::new(loaded.session));
        table.insert(session_id.to_string(), h.clone());
        Ok(h)
    }

    pub async fn session(&self, session_id: &str) -> Result<ChatSession, ChatError> {
        Ok(self.handle(session_id)?.lock().await.clone())
    }

    /// Append the user's message, ask the LLM with the full history and
    /// append its reply. On failure the user message stays in the log with
    /// a failure marker.
    pub async fn send_message(&self, session_id: &str, text: &str) -> Result<String, ChatError> {
        if text.trim().is_empty() {
            return Err(ChatError::EmptyMessage);
        }
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().await;
        self.store.record(
            &mut session,
            SessionEvent::Message {
                message: Message::new(Role::User, text),
            },
        )?;
        match self.llm.complete(&session.messages).await {
            Ok(reply) => {
                let message = Message::new(Role::Assistant, reply.clone());
                self.store.record(&mut session, SessionEvent::Message { message })?;
                Ok(reply)
            }
            Err(e) => {
                let index = session.messages.len() - 1;
                self.store.record(
                    &mut session,
                    SessionEvent::Failure {
                        index,
                        error: e.kind().to_string(),
                    },
                )?;
                Err(e)
            }
        }
    }

    pub async fn rate(&self, session_id: &str, rating: Rating) -> Result<(), ChatError> {
        rating.validate()?;
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().await;
        self.store.record(&mut session, SessionEvent::Rating { rating })
    }
}
