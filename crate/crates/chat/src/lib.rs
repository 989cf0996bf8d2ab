//! Stress-aware empathic chat: a psychologist/CBT system prompt carrying the
//! monitor's stress summary, a provider-agnostic chat-completion client,
//! append-only session logs and the HTTP API the web client talks to.
//!
//! Only summary fields ever reach the language model; raw samples stay in
//! the monitor.

pub mod chat;
pub mod error;
pub mod llm;
pub mod mock;
pub mod prompt;
pub mod server;
pub mod session;

pub use chat::ChatService;
pub use error::ChatError;
pub use llm::{ApiKey, LlmClient, LlmEndpointConfig};
pub use prompt::{build_system_prompt, greeting, PromptContext};
pub use server::{build_state, router, serve, serve_on, AppState, ServerConfig};
pub use session::{ChatSession, Message, Rating, Role, SessionEvent, SessionStore};
