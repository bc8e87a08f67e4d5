//! Per-task wrapper around the gateway that stamps requests with the run's
//! decoding settings and records every model call as a trace turn.

use sha2::{Digest, Sha256};

use crate::gateway::{split_thinking, ChatRequest, ChatResponse, Gateway, GatewayError, Message};
use crate::types::{AgentRole, DecodingConfig, Turn};

pub struct ModelSession<'g> {
    gateway: &'g Gateway,
    task_id: String,
    decoding: DecodingConfig,
    seed: u64,
    turns: Vec<Turn>,
}

impl<'g> ModelSession<'g> {
    pub fn new(gateway: &'g Gateway, task_id: impl Into<String>, decoding: DecodingConfig, seed: u64) -> Self {
        ModelSession { gateway, task_id: task_id.into(), decoding, seed, turns: Vec::new() }
    }

    /// Issues one request. The returned content has any inline `<think>`
    /// block removed; the segment is kept on the recorded turn.
    pub async fn ask(
        &mut self,
        role: AgentRole,
        system_prompt: &str,
        messages: Vec<Message>,
        thinking_enabled: bool,
    ) -> Result<ChatResponse, GatewayError> {
        let request = ChatRequest {
            role,
            task_id: self.task_id.clone(),
            system_prompt: system_prompt.to_string(),
            messages,
            thinking_enabled,
            max_output_tokens: self.decoding.max_output_tokens,
            temperature: self.decoding.temperature,
            seed: self.seed,
        };
        let digest = prompt_digest(&request);
        let mut response = self.gateway.complete(request).await?;
        let (content, inline) = split_thinking(&response.content);
        if response.thinking_segment.is_none() && thinking_enabled {
            response.thinking_segment = inline;
        }
        self.turns.push(Turn {
            role,
            thinking_enabled,
            prompt_digest: digest,
            raw_output: response.content.clone(),
            thinking_segment: response.thinking_segment.clone(),
        });
        response.content = content;
        Ok(response)
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn into_turns(self) -> Vec<Turn> {
        self.turns
    }
}

/// SHA-256 over the role, system prompt and message transcript.
pub fn prompt_digest(request: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.role.as_str().as_bytes());
    hasher.update([0]);
    hasher.update(request.system_prompt.as_bytes());
    for m in &request.messages {
        hasher.update([0]);
        hasher.update(format!("{:?}", m.speaker).as_bytes());
        hasher.update([0]);
        hasher.update(m.content.as_bytes());
    }
    hex::encode(hasher.finalize())
}
