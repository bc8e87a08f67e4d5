use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, TokenUsage};

/// One canned reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStep {
    /// Substring the last user message must contain.
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub match_text: Option<String>,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinking: Option<String>,
    /// Simulated execution time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl ScriptStep {
    pub fn reply(response: impl Into<String>) -> Self {
        ScriptStep { match_text: None, response: response.into(), thinking: None, latency_ms: None }
    }

    pub fn expecting(mut self, needle: impl Into<String>) -> Self {
        self.match_text = Some(needle.into());
        self
    }

    pub fn with_thinking(mut self, thinking: impl Into<String>) -> Self {
        self.thinking = Some(thinking.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub steps: Vec<ScriptStep>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Bare(Vec<ScriptStep>),
    Wrapped { steps: Vec<ScriptStep> },
}

impl Script {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        Script { steps }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, GatewayError> {
        let file: ScriptFile = serde_json::from_str(text).map_err(|e| GatewayError::ScriptParse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        let steps = match file {
            ScriptFile::Bare(steps) | ScriptFile::Wrapped { steps } => steps,
        };
        Ok(Script { steps })
    }
}

struct Cursor {
    steps: VecDeque<ScriptStep>,
    consumed: usize,
}

impl Cursor {
    fn new(script: Script) -> Self {
        Cursor { steps: script.steps.into(), consumed: 0 }
    }
}

enum Queues {
    Shared(Cursor),
    PerTask(HashMap<String, Cursor>),
}

/// Deterministic backend replaying scripted replies in order.
///
/// A single script is consumed by every request regardless of task; a
/// script directory keeps one independent cursor per task id, which keeps
/// concurrent runs deterministic.
pub struct ScriptedBackend {
    queues: Mutex<Queues>,
    log: Mutex<Vec<ChatRequest>>,
}

pub fn load_script(path: impl AsRef<Path>) -> Result<ScriptedBackend, GatewayError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GatewayError::ScriptParse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(ScriptedBackend::new(Script::parse(&text, &path.display().to_string())?))
}

/// Loads every `<task_id>.json` in `dir` as that task's script.
pub fn load_script_dir(dir: impl AsRef<Path>) -> Result<ScriptedBackend, GatewayError> {
    let dir = dir.as_ref();
    let parse_err = |reason: String| GatewayError::ScriptParse { path: dir.display().to_string(), reason };
    let mut scripts = HashMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| parse_err(e.to_string()))?;
    for entry in entries {
        let path = entry.map_err(|e| parse_err(e.to_string()))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(task_id) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        let text = std::fs::read_to_string(&path).map_err(|e| parse_err(e.to_string()))?;
        scripts.insert(task_id.to_string(), Script::parse(&text, &path.display().to_string())?);
    }
    Ok(ScriptedBackend::per_task(scripts))
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend { queues: Mutex::new(Queues::Shared(Cursor::new(script))), log: Mutex::new(Vec::new()) }
    }

    pub fn per_task(scripts: HashMap<String, Script>) -> Self {
        let cursors = scripts.into_iter().map(|(k, s)| (k, Cursor::new(s))).collect();
        ScriptedBackend { queues: Mutex::new(Queues::PerTask(cursors)), log: Mutex::new(Vec::new()) }
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap().clone()
    }

    fn next_step(&self, request: &ChatRequest) -> Result<(usize, ScriptStep), GatewayError> {
        let mut queues = self.queues.lock().unwrap();
        let cursor = match &mut *queues {
            Queues::Shared(c) => c,
            Queues::PerTask(map) => map
                .get_mut(&request.task_id)
                .ok_or_else(|| GatewayError::UnknownScriptTask(request.task_id.clone()))?,
        };
        let step = cursor
            .steps
            .pop_front()
            .ok_or(GatewayError::ScriptExhausted { steps: cursor.consumed })?;
        cursor.consumed += 1;
        Ok((cursor.consumed, step))
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn execute(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if request.messages.is_empty() {
            return Err(GatewayError::Precondition("request has no messages".into()));
        }
        self.log.lock().unwrap().push(request.clone());
        let (index, step) = self.next_step(request)?;
        if let Some(needle) = &step.match_text {
            let last = request.last_user_message().unwrap_or_default();
            if !last.contains(needle.as_str()) {
                return Err(GatewayError::MatchFailure { step: index, expected: needle.clone() });
            }
        }
        let latency = Duration::from_millis(step.latency_ms.unwrap_or(0));
        if !latency.is_zero() {
            tokio::time::sleep(latency).await;
        }
        let thinking_segment = if request.thinking_enabled { step.thinking } else { None };
        Ok(ChatResponse {
            token_usage: TokenUsage {
                prompt: request.messages.iter().map(|m| m.content.split_whitespace().count() as u64).sum(),
                completion: step.response.split_whitespace().count() as u64,
            },
            content: step.response,
            thinking_segment,
            latency,
        })
    }

    fn supports_thinking_flag(&self) -> bool {
        true
    }
}
