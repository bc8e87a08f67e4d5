use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{split_thinking, ChatBackend, ChatRequest, ChatResponse, GatewayError, Speaker, TokenUsage};

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
///
/// Thinking is toggled with `chat_template_kwargs.enable_thinking`, which
/// vLLM and SGLang forward to templates that understand it. Set
/// `native_thinking_flag` to false for servers that reject unknown fields;
/// the gateway then falls back to the system-prompt suffix.
pub struct HttpBackend {
    client: reqwest::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    native_thinking_flag: bool,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default, alias = "reasoning")]
    reasoning_content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    /// `base_url` may be the full `.../chat/completions` URL or the API root
    /// (e.g. `http://host:8000/v1`).
    pub fn new(base_url: &str, model: impl Into<String>, api_key: Option<String>) -> Self {
        let trimmed = base_url.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        HttpBackend {
            client: reqwest::Client::new(),
            url,
            model: model.into(),
            api_key,
            native_thinking_flag: true,
        }
    }

    pub fn with_native_thinking_flag(mut self, enabled: bool) -> Self {
        self.native_thinking_flag = enabled;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut messages = vec![json!({"role": "system", "content": request.system_prompt})];
        for m in &request.messages {
            let role = match m.speaker {
                Speaker::User | Speaker::Tool => "user",
                Speaker::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": m.content}));
        }
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "seed": request.seed,
            "max_tokens": request.max_output_tokens,
            "stream": false,
        });
        if self.native_thinking_flag {
            body["chat_template_kwargs"] = json!({"enable_thinking": request.thinking_enabled});
        }
        body
    }
}

fn transport_error(err: reqwest::Error) -> GatewayError {
    if err.is_timeout() {
        GatewayError::Timeout(Duration::ZERO)
    } else if err.is_decode() {
        GatewayError::Protocol(err.to_string())
    } else {
        GatewayError::Transport(err.to_string())
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn execute(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let started = Instant::now();
        let mut call = self.client.post(&self.url).json(&self.body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().await.map_err(transport_error)?;
        let status = response.status();
        let text = response.text().await.map_err(transport_error)?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(GatewayError::Transport(format!("HTTP {status}: {}", snippet(&text))));
        }
        if !status.is_success() {
            return Err(GatewayError::Rejected(format!("HTTP {status}: {}", snippet(&text))));
        }
        let body: CompletionBody =
            serde_json::from_str(&text).map_err(|e| GatewayError::Protocol(e.to_string()))?;
        let message = body
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::Protocol("reply has no choices".into()))?
            .message;
        let raw = message.content.unwrap_or_default();
        let (content, inline_thinking) = split_thinking(&raw);
        let thinking_segment = message.reasoning_content.filter(|r| !r.trim().is_empty()).or(inline_thinking);
        let usage = body.usage.unwrap_or(Usage { prompt_tokens: 0, completion_tokens: 0 });
        Ok(ChatResponse {
            content,
            thinking_segment,
            token_usage: TokenUsage { prompt: usage.prompt_tokens, completion: usage.completion_tokens },
            latency: started.elapsed(),
        })
    }

    fn supports_thinking_flag(&self) -> bool {
        self.native_thinking_flag
    }
}

fn snippet(text: &str) -> &str {
    let end = text.char_indices().nth(200).map_or(text.len(), |(i, _)| i);
    &text[..end]
}
