//! Model backends. Only `WireBackend` touches the network.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("replay fixture exhausted after {0} responses")]
    FixtureExhausted(usize),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("backend: {0}")]
    Transport(String),
}

pub trait LlmBackend: Send + Sync {
    /// Reply to the conversation so far.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;

    /// Whether replies come from recorded fixtures.
    fn is_replay(&self) -> bool {
        false
    }
}

/// Serves recorded responses in order.
#[derive(Debug)]
pub struct ReplayBackend {
    responses: Vec<String>,
    cursor: Mutex<usize>,
}

impl ReplayBackend {
    pub fn new(responses: Vec<String>) -> Self {
        ReplayBackend {
            responses,
            cursor: Mutex::new(0),
        }
    }

    /// Reads a JSON array of response strings.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        let responses: Vec<String> =
            serde_json::from_str(&text).map_err(|e| BackendError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(Self::new(responses))
    }

    pub fn served(&self) -> usize {
        *self.cursor.lock().expect("no poisoned lock")
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, BackendError> {
        let mut i = self.cursor.lock().expect("no poisoned lock");
        let r = self
            .responses
            .get(*i)
            .cloned()
            .ok_or(BackendError::FixtureExhausted(self.responses.len()))?;
        *i += 1;
        Ok(r)
    }

    fn is_replay(&self) -> bool {
        true
    }
}

/// Chat-completions client.
#[derive(Debug, Clone)]
pub struct WireBackend {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub key_var: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl WireBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, key_var: impl Into<String>) -> Self {
        WireBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            key_var: key_var.into(),
        }
    }
}

impl LlmBackend for WireBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let key = std::env::var(&self.key_var)
            .map_err(|_| BackendError::Transport(format!("environment variable {} is not set", self.key_var)))?;
        let body = ChatRequest {
            model: &self.model,
            messages,
            temperature: 0.0,
        };
        let mut resp = ureq::post(&self.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Transport("response has no choices".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_serves_in_order_then_errors() {
        let b = ReplayBackend::new(vec!["a".into(), "b".into()]);
        assert_eq!(b.complete(&[]).unwrap(), "a");
        assert_eq!(b.complete(&[]).unwrap(), "b");
        assert_eq!(b.complete(&[]), Err(BackendError::FixtureExhausted(2)));
    }

    #[test]
    fn wire_without_key_fails_before_network() {
        let b = WireBackend::new("http://127.0.0.1:9/v1/chat/completions", "m", "SKETCHPLAN_TEST_UNSET_KEY");
        assert!(matches!(b.complete(&[ChatMessage::user("hi")]), Err(BackendError::Transport(_))));
    }
}
