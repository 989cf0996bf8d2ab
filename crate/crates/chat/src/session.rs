//! Chat sessions and their append-only JSONL logs.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;
use uuid::Uuid;

use crate::error::ChatError;
use crate::prompt::PromptContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
    /// Set on a user message whose reply failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_failure: Option<String>,
}

impl Message {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            text: text.into(),
            timestamp: Utc::now(),
            pending_failure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub quality: u8,
    pub empathy: u8,
    #[serde(default)]
    pub comment: String,
}

impl Rating {
    pub fn validate(&self) -> Result<(), ChatError> {
        for (name, v) in [("quality", self.quality), ("empathy", self.empathy)] {
            if !(1..=5).contains(&v) {
                return Err(ChatError::InvalidRating(format!("{name} must be 1 to 5, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub context: PromptContext,
    pub messages: Vec<Message>,
    pub rating: Option<Rating>,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        created_at: DateTime<Utc>,
        context: PromptContext,
    },
    Message {
        message: Message,
    },
    Failure {
        index: usize,
        error: String,
    },
    Rating {
        rating: Rating,
    },
}

impl ChatSession {
    /// Apply one log event. Messages are only appended; ratings replace.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), String> {
        match event {
            SessionEvent::Created { .. } => return Err("duplicate created event".into()),
            SessionEvent::Message { message } => self.check_next_role(message.role)?.messages.push(message.clone()),
            SessionEvent::Failure { index, error } => {
                let m = self
                    .messages
                    .get_mut(*index)
                    .filter(|m| m.role == Role::User)
                    .ok_or_else(|| format!("failure marker for message {index}, which is not a user message"))?;
                m.pending_failure = Some(error.clone());
            }
            SessionEvent::Rating { rating } => self.rating = Some(rating.clone()),
        }
        Ok(())
    }

    fn check_next_role(&mut self, role: Role) -> Result<&mut Self, String> {
        let ok = match (self.messages.last(), role) {
            (None, r) => r == Role::System,
            (Some(_), Role::System) => false,
            (Some(m), Role::Assistant) => m.role != Role::Assistant,
            // a user message follows the greeting, a reply, or a failed user message
            (Some(m), Role::User) => m.role == Role::Assistant || m.pending_failure.is_some(),
        };
        if ok {
            Ok(self)
        } else {
            Err(format!("{} message out of turn at position {}", role.as_str(), self.messages.len()))
        }
    }

    /// The index of the most recent user message.
    pub fn last_user_index(&self) -> Option<usize> {
        self.messages.iter().rposition(|m| m.role == Role::User)
    }
}

/// Result of reading a session log.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSession {
    pub session: ChatSession,
    /// 1-based number of the first unreadable line, if the log was cut short.
    pub truncated_at: Option<usize>,
}

/// A directory of `<session_id>.jsonl` logs.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

pub fn valid_session_id(id: &str) -> bool {
    Uuid::parse_str(id).is_ok()
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ChatError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ChatError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    /// Start a new log holding only the created event.
    pub fn create(&self, context: PromptContext) -> Result<ChatSession, ChatError> {
        let session = ChatSession {
            session_id: Uuid::new_v4().to_string(),
            created_at: Utc::now(),
            context,
            messages: Vec::new(),
            rating: None,
        };
        let event = SessionEvent::Created {
            session_id: session.session_id.clone(),
            created_at: session.created_at,
            context: session.context.clone(),
        };
        self.append(&session.session_id, &event)?;
        Ok(session)
    }

    /// Append one event and sync it to disk.
    pub fn append(&self, session_id: &str, event: &SessionEvent) -> Result<(), ChatError> {
        let path = self.path_for(session_id);
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ChatError::io(&path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| ChatError::io(&path, e))?;
        f.sync_data().map_err(|e| ChatError::io(&path, e))
    }

    /// Apply `event` to `session` and persist it.
    pub fn record(&self, session: &mut ChatSession, event: SessionEvent) -> Result<(), ChatError> {
        session
            .apply(&event)
            .map_err(|e| ChatError::Config(format!("session {}: {e}", session.session_id)))?;
        self.append(&session.session_id, &event)
    }

    /// Replay a log. Reading stops at the first corrupt line.
    pub fn load(&self, session_id: &str) -> Result<LoadedSession, ChatError> {
        if !valid_session_id(session_id) {
            return Err(ChatError::SessionNotFound(session_id.to_string()));
        }
        let path = self.path_for(session_id);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ChatError::SessionNotFound(session_id.to_string()))
            }
            Err(e) => return Err(ChatError::io(&path, e)),
        };
        let mut session: Option<ChatSession> = None;
        let mut truncated_at = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ChatError::io(&path, e))?;
            let parsed = serde_json::from_str::<SessionEvent>(&line).map_err(|e| e.to_string());
            let applied = match (parsed, session.as_mut()) {
                (Ok(SessionEvent::Created { session_id, created_at, context }), None) => {
                    session = Some(ChatSession {
                        session_id,
                        created_at,
                        context,
                        messages: Vec::new(),
                        rating: None,
                    });
                    Ok(())
                }
                (Ok(_), None) => Err("log does not start with a created event".to_string()),
                (Ok(ev), Some(s)) => s.apply(&ev),
                (Err(e), _) => Err(e),
            };
            if let Err(reason) = applied {
                warn!(session_id, line = i + 1, reason, "session log truncated");
                truncated_at = Some(i + 1);
                break;
            }
        }
        let session = session.ok_or_else(|| ChatError::SessionNotFound(session_id.to_string()))?;
        Ok(LoadedSession { session, truncated_at })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use emllm_core::monitor::StressSummary;

    fn five_message_session(store: &SessionStore) -> ChatSession {
        let mut s = store.create(PromptContext::new("Ana", StressSummary::empty())).unwrap();
        for (role, text) in [
            (Role::System, "sys"),
            (Role::Assistant, "hello"),
            (Role::User, "hi"),
            (Role::Assistant, "how are you"),
            (Role::User, "tired"),
        ] {
            store
                .record(&mut s, SessionEvent::Message { message: Message::new(role, text) })
                .unwrap();
        }
        s
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = five_message_session(&store);
        store
            .record(&mut s, SessionEvent::Failure { index: 4, error: "LlmUnavailable".into() })
            .unwrap();
        store
            .record(&mut s, SessionEvent::Rating { rating: Rating { quality: 4, empathy: 5, comment: "ok".into() } })
            .unwrap();
        let loaded = store.load(&s.session_id).unwrap();
        assert_eq!(loaded.truncated_at, None);
        assert_eq!(loaded.session, s);
    }

    #[test]
    fn truncated_last_line_keeps_the_rest() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = five_message_session(&store);
        let path = store.path_for(&s.session_id);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() - 10]).unwrap();
        let loaded = store.load(&s.session_id).unwrap();
        assert_eq!(loaded.session.messages.len(), 4);
        assert_eq!(loaded.session.messages[..], s.messages[..4]);
        assert_eq!(loaded.truncated_at, Some(6));
    }

    #[test]
    fn turn_order_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = store.create(PromptContext::new("Ana", StressSummary::empty())).unwrap();
        let user = SessionEvent::Message { message: Message::new(Role::User, "first") };
        assert!(s.apply(&user).is_err());
        let mut s = five_message_session(&store);
        assert!(s.apply(&user).is_err());
        s.apply(&SessionEvent::Failure { index: 4, error: "Timeout".into() }).unwrap();
        s.apply(&user).unwrap();
    }

    #[test]
    fn unknown_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("../etc/passwd"), Err(ChatError::SessionNotFound(_))));
        assert!(matches!(store.load(&Uuid::new_v4().to_string()), Err(ChatError::SessionNotFound(_))));
    }

    #[test]
    fn ratings_are_range_checked() {
        assert!(Rating { quality: 0, empathy: 3, comment: String::new() }.validate().is_err());
        assert!(Rating { quality: 5, empathy: 6, comment: String::new() }.validate().is_err());
        assert!(Rating { quality: 1, empathy: 5, comment: String::new() }.validate().is_ok());
    }
}
