//! Exclusive, FIFO-ordered access to the one shared chat backend.
//!
//! Every role (planner and tool agents) funnels its requests through a single
//! [`Gateway`]. The gateway holds a fair async mutex for the duration of each
//! backend execution, so at most one completion is in flight at any instant
//! and waiters are served in the order they queued.

mod http;
mod scripted;

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::types::AgentRole;

pub use http::HttpBackend;
pub use scripted::{load_script, load_script_dir, Script, ScriptStep, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub speaker: Speaker,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message { speaker: Speaker::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { speaker: Speaker::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: AgentRole,
    /// Run-local tag used by per-task scripts and logging; not sent upstream.
    pub task_id: String,
    pub system_prompt: String,
    pub messages: Vec<Message>,
    pub thinking_enabled: bool,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

impl ChatRequest {
    pub fn last_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.speaker == Speaker::User)
            .map(|m| m.content.as_str())
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::Precondition("request has no messages".into()));
        }
        if self.system_prompt.trim().is_empty() {
            return Err(GatewayError::Precondition("system prompt is empty".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::Precondition("max_output_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::Precondition("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub thinking_segment: Option<String>,
    pub token_usage: TokenUsage,
    #[serde(with = "crate::types::duration_ms")]
    pub latency: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("backend call exceeded {0:?}")]
    Timeout(Duration),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed backend reply: {0}")]
    Protocol(String),
    /// The server refused the request itself; resending cannot help.
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("script file {path}: {reason}")]
    ScriptParse { path: String, reason: String },
    #[error("script exhausted after {steps} steps")]
    ScriptExhausted { steps: usize },
    #[error("script step {step} expects last user message to contain {expected:?}")]
    MatchFailure { step: usize, expected: String },
    #[error("no script loaded for task `{0}`")]
    UnknownScriptTask(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<GatewayError> },
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::Timeout(_) | GatewayError::Transport(_) | GatewayError::Protocol(_)
        )
    }
}

/// A chat-completion backend. Implementations need not be reentrant; the
/// gateway never calls `execute` concurrently.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn execute(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    /// Whether the backend honours `thinking_enabled` natively. Backends
    /// without the switch get the prompt-suffix fallback.
    fn supports_thinking_flag(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct GatewayPolicy {
    pub per_call_timeout: Duration,
    /// Extra attempts after the first for retryable failures.
    pub retries: u32,
    pub thinking_off_suffix: String,
}

impl Default for GatewayPolicy {
    fn default() -> Self {
        GatewayPolicy {
            per_call_timeout: Duration::from_secs(300),
            retries: 2,
            thinking_off_suffix: "/no_think".to_string(),
        }
    }
}

pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    slot: Mutex<()>,
    policy: GatewayPolicy,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, policy: GatewayPolicy) -> Self {
        Gateway { backend, slot: Mutex::new(()), policy }
    }

    pub fn policy(&self) -> &GatewayPolicy {
        &self.policy
    }

    /// Runs one completion under the exclusive-access lock, retrying
    /// transient failures.
    pub async fn complete(&self, request: ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let request = self.apply_thinking_control(request);

        let attempts = self.policy.retries + 1;
        let mut last = None;
        for attempt in 1..=attempts {
            match self.execute_once(&request).await {
                Ok(mut response) => {
                    if !request.thinking_enabled {
                        response.thinking_segment = None;
                    }
                    return Ok(response);
                }
                Err(err) if err.is_retryable() => {
                    tracing::warn!(task = %request.task_id, role = %request.role, attempt, error = %err, "backend call failed");
                    last = Some(err);
                }
                Err(err) => return Err(err),
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }

    async fn execute_once(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let _guard = self.slot.lock().await;
        let started = Instant::now();
        let outcome =
            tokio::time::timeout(self.policy.per_call_timeout, self.backend.execute(request)).await;
        match outcome {
            Ok(Ok(mut response)) => {
                if response.latency.is_zero() {
                    response.latency = started.elapsed();
                }
                Ok(response)
            }
            Ok(Err(err)) => Err(err),
            Err(_) => Err(GatewayError::Timeout(self.policy.per_call_timeout)),
        }
    }

    fn apply_thinking_control(&self, mut request: ChatRequest) -> ChatRequest {
        if !request.thinking_enabled
            && !self.backend.supports_thinking_flag()
            && !self.policy.thinking_off_suffix.is_empty()
        {
            request.system_prompt.push('\n');
            request.system_prompt.push_str(&self.policy.thinking_off_suffix);
        }
        request
    }
}

/// Splits a `<think>...</think>` prefix off a raw completion.
///
/// Returns `(content, thinking)`. A dangling `</think>` with no opener
/// treats everything before it as thinking; an unclosed `<think>` swallows
/// the rest of the output.
pub fn split_thinking(raw: &str) -> (String, Option<String>) {
    const OPEN: &str = "<think>";
    const CLOSE: &str = "</think>";
    let mut content = String::new();
    let mut thinking = Vec::new();
    let mut rest = raw;

    if let Some(close) = rest.find(CLOSE) {
        if rest.find(OPEN).is_none_or(|open| open > close) {
            thinking.push(rest[..close].trim().to_string());
            rest = &rest[close + CLOSE.len()..];
        }
    }
    loop {
        match rest.find(OPEN) {
            Some(open) => {
                content.push_str(&rest[..open]);
                let after = &rest[open + OPEN.len()..];
                match after.find(CLOSE) {
                    Some(close) => {
                        thinking.push(after[..close].trim().to_string());
                        rest = &after[close + CLOSE.len()..];
                    }
                    None => {
                        thinking.push(after.trim().to_string());
                        rest = "";
                    }
                }
            }
            None => {
                content.push_str(rest);
                break;
            }
        }
    }
    let thinking = if thinking.is_empty() { None } else { Some(thinking.join("\n")) };
    (content.trim().to_string(), thinking)
}
