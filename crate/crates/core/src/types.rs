//! Shared domain vocabulary: tasks, roles, thinking policies, run
//! configuration and the per-task trace.

use std::collections::BTreeMap;
use std::fmt;
use std::num::NonZeroU32;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Literal recorded as the predicted answer when a run stops while the
/// planner is still requesting tools.
pub const TOOL_CALL_PLACEHOLDER: &str = "<tool_call>";

/// Literal recorded as the predicted answer when the backend fails for good.
pub const BACKEND_ERROR_ANSWER: &str = "BACKEND_ERROR";

pub const DEFAULT_MAX_TOOL_CALLS: u32 = 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("level must be 1, 2 or 3 (got {0})")]
    InvalidLevel(i64),
    #[error("unknown answer shape `{0}`")]
    InvalidShape(String),
    #[error("unknown agent role `{0}`")]
    InvalidRole(String),
    #[error("unknown thinking policy `{0}` (expected none, planner or full)")]
    InvalidPolicy(String),
}

/// GAIA difficulty level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Level(u8);

impl Level {
    pub const ALL: [Level; 3] = [Level(1), Level(2), Level(3)];

    pub fn new(value: i64) -> Result<Self, TypeError> {
        match value {
            1..=3 => Ok(Level(value as u8)),
            other => Err(TypeError::InvalidLevel(other)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Level {
    type Error = TypeError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Level::new(value as i64)
    }
}

impl From<Level> for u8 {
    fn from(level: Level) -> u8 {
        level.0
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Optional description of what a well-formed answer looks like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AnswerShape {
    FreeText,
    Integer,
    Decimal,
    CommaList,
    /// Fixed-length alphanumeric token, e.g. a three-letter country code.
    CodeToken(usize),
}

impl fmt::Display for AnswerShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerShape::FreeText => f.write_str("free_text"),
            AnswerShape::Integer => f.write_str("integer"),
            AnswerShape::Decimal => f.write_str("decimal"),
            AnswerShape::CommaList => f.write_str("comma_list"),
            AnswerShape::CodeToken(n) => write!(f, "code_token({n})"),
        }
    }
}

impl FromStr for AnswerShape {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "free_text" => return Ok(AnswerShape::FreeText),
            "integer" => return Ok(AnswerShape::Integer),
            "decimal" => return Ok(AnswerShape::Decimal),
            "comma_list" => return Ok(AnswerShape::CommaList),
            _ => {}
        }
        s.strip_prefix("code_token(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|n| n.trim().parse::<usize>().ok())
            .filter(|n| *n > 0)
            .map(AnswerShape::CodeToken)
            .ok_or_else(|| TypeError::InvalidShape(s.to_string()))
    }
}

impl TryFrom<String> for AnswerShape {
    type Error = TypeError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<AnswerShape> for String {
    fn from(shape: AnswerShape) -> String {
        shape.to_string()
    }
}

/// One GAIA-style question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub question: String,
    pub level: Level,
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_shape: Option<AnswerShape>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<PathBuf>,
}

/// The four faces of the shared backbone model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Planner,
    WebSearch,
    Coder,
    MindMap,
}

impl AgentRole {
    pub const ALL: [AgentRole; 4] = [
        AgentRole::Planner,
        AgentRole::WebSearch,
        AgentRole::Coder,
        AgentRole::MindMap,
    ];

    /// Roles the planner can invoke, in reporting order.
    pub const TOOLS: [AgentRole; 3] = [AgentRole::WebSearch, AgentRole::Coder, AgentRole::MindMap];

    /// Name used in the tool-call grammar; `None` for the planner.
    pub fn tool_name(self) -> Option<&'static str> {
        match self {
            AgentRole::Planner => None,
            AgentRole::WebSearch => Some("web_search"),
            AgentRole::Coder => Some("code"),
            AgentRole::MindMap => Some("mind_map"),
        }
    }

    pub fn from_tool_name(name: &str) -> Option<AgentRole> {
        match name {
            "web_search" => Some(AgentRole::WebSearch),
            "code" => Some(AgentRole::Coder),
            "mind_map" => Some(AgentRole::MindMap),
            _ => None,
        }
    }

    pub fn is_tool(self) -> bool {
        self != AgentRole::Planner
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Planner => "planner",
            AgentRole::WebSearch => "web_search",
            AgentRole::Coder => "coder",
            AgentRole::MindMap => "mind_map",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which roles get explicit thinking enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThinkingPolicy {
    #[default]
    None,
    PlannerOnly,
    Full,
}

impl ThinkingPolicy {
    pub const ALL: [ThinkingPolicy; 3] = [
        ThinkingPolicy::None,
        ThinkingPolicy::PlannerOnly,
        ThinkingPolicy::Full,
    ];

    pub fn thinks(self, role: AgentRole) -> bool {
        thinks(self, role)
    }

    /// Short label used on the command line and in reports.
    pub fn label(self) -> &'static str {
        match self {
            ThinkingPolicy::None => "none",
            ThinkingPolicy::PlannerOnly => "planner",
            ThinkingPolicy::Full => "full",
        }
    }
}

impl FromStr for ThinkingPolicy {
    type Err = TypeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "no" => Ok(ThinkingPolicy::None),
            "planner" | "planner_only" => Ok(ThinkingPolicy::PlannerOnly),
            "full" | "yes" => Ok(ThinkingPolicy::Full),
            other => Err(TypeError::InvalidPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for ThinkingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn thinks(policy: ThinkingPolicy, role: AgentRole) -> bool {
    match policy {
        ThinkingPolicy::None => false,
        ThinkingPolicy::PlannerOnly => role == AgentRole::Planner,
        ThinkingPolicy::Full => true,
    }
}

/// Where chat completions come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Replayed script file, or a directory of per-task scripts.
    Scripted { path: PathBuf },
    /// OpenAI-compatible chat-completions endpoint.
    Http {
        url: String,
        model: String,
        /// Environment variable holding the bearer token, if any.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
    },
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Http {
            url: "http://127.0.0.1:8000/v1".to_string(),
            model: "default".to_string(),
            api_key_env: None,
        }
    }
}

impl BackendSpec {
    /// Parses `scripted:<path>` or `http:<url>`.
    pub fn parse(spec: &str, default_model: &str) -> Option<BackendSpec> {
        if let Some(path) = spec.strip_prefix("scripted:") {
            return Some(BackendSpec::Scripted { path: PathBuf::from(path) });
        }
        if spec.starts_with("https://") {
            return Some(BackendSpec::Http {
                url: spec.to_string(),
                model: default_model.to_string(),
                api_key_env: None,
            });
        }
        let url = spec.strip_prefix("http:")?;
        // `http:http://host` and `http://host` both appear in practice.
        let url = if url.starts_with("//") { format!("http:{url}") } else { url.to_string() };
        Some(BackendSpec::Http { url, model: default_model.to_string(), api_key_env: None })
    }

    pub fn is_scripted(&self) -> bool {
        matches!(self, BackendSpec::Scripted { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkPolicy {
    #[default]
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxLimits {
    /// Program and leading arguments; the source file path is appended.
    pub interpreter_cmd: Vec<String>,
    /// Extension given to the temporary source file.
    pub source_suffix: String,
    #[serde(with = "duration_ms")]
    pub wall_time: Duration,
    pub memory_bytes: u64,
    pub stdout_byte_cap: usize,
    pub network: NetworkPolicy,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        SandboxLimits {
            interpreter_cmd: vec!["python3".to_string()],
            source_suffix: ".py".to_string(),
            wall_time: Duration::from_secs(10),
            memory_bytes: 1 << 30,
            stdout_byte_cap: 64 * 1024,
            network: NetworkPolicy::Forbidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchProviderSpec {
    /// Directory of keyed result files; `None` answers every query with no results.
    Fixture {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dir: Option<PathBuf>,
    },
    Live {
        endpoint: String,
        api_key_env: String,
    },
}

impl Default for SearchProviderSpec {
    fn default() -> Self {
        SearchProviderSpec::Fixture { dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub provider: SearchProviderSpec,
    pub max_subqueries: usize,
    pub top_k: usize,
    #[serde(with = "duration_ms")]
    pub timeout: Duration,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            provider: SearchProviderSpec::default(),
            max_subqueries: 3,
            top_k: 5,
            timeout: Duration::from_secs(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Appended to the system prompt when thinking is off and the backend
    /// has no native switch.
    pub thinking_off_suffix: String,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            temperature: 0.0,
            max_output_tokens: 4096,
            thinking_off_suffix: "/no_think".to_string(),
        }
    }
}

/// Everything that determines one run over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendSpec,
    pub tools_enabled: bool,
    pub thinking: ThinkingPolicy,
    pub max_tool_calls: NonZeroU32,
    #[serde(with = "duration_ms")]
    pub per_call_timeout: Duration,
    pub retries_per_tool: u32,
    pub seed: u64,
    pub decoding: DecodingConfig,
    pub sandbox: SandboxLimits,
    pub search: SearchConfig,
    /// Observations longer than this are cut before reaching the planner.
    pub observation_byte_cap: usize,
    /// Format-reminder re-prompts allowed per planner turn.
    pub soft_retries: u32,
    /// Optional per-tool caps; empty means only the global budget applies.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub per_tool_budget: BTreeMap<AgentRole, u32>,
    pub mindmap_top_m: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendSpec::default(),
            tools_enabled: true,
            thinking: ThinkingPolicy::None,
            max_tool_calls: NonZeroU32::new(DEFAULT_MAX_TOOL_CALLS).unwrap(),
            per_call_timeout: Duration::from_secs(300),
            retries_per_tool: 2,
            seed: 0,
            decoding: DecodingConfig::default(),
            sandbox: SandboxLimits::default(),
            search: SearchConfig::default(),
            observation_byte_cap: 4096,
            soft_retries: 2,
            per_tool_budget: BTreeMap::new(),
            mindmap_top_m: 8,
        }
    }
}

impl RunConfig {
    pub fn max_tool_calls(&self) -> usize {
        self.max_tool_calls.get() as usize
    }

    /// Short `tools/thinking` label, e.g. `agentic/planner`.
    pub fn label(&self) -> String {
        let tools = if self.tools_enabled { "agentic" } else { "no-tools" };
        format!("{tools}/{}", self.thinking.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolErrorTag {
    ProviderTimeout,
    ProviderQuota,
    ProviderParse,
    CodeExecutionFailed,
    EmptyOutput,
    SandboxSpawn,
    PerToolBudget,
    Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    /// 1-based position among this trace's tool calls.
    pub index: u32,
    pub tool: AgentRole,
    pub arguments: String,
    pub observation: String,
    #[serde(with = "duration_ms")]
    pub wall_time: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ToolErrorTag>,
}

/// One model call made during a run, by any role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: AgentRole,
    pub thinking_enabled: bool,
    pub prompt_digest: String,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinking_segment: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FinalAnswer,
    BudgetExhausted,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub task_id: String,
    pub config_snapshot: RunConfig,
    pub turns: Vec<Turn>,
    pub tool_calls: Vec<ToolCallRecord>,
    pub final_answer: String,
    pub terminated_by: Termination,
    pub predicted_answer: String,
    /// Planner turns that stayed malformed after all soft retries.
    #[serde(default)]
    pub malformed_turns: u32,
}

impl Trace {
    pub fn calls_to(&self, tool: AgentRole) -> usize {
        self.tool_calls.iter().filter(|c| c.tool == tool).count()
    }

    pub fn planner_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.role == AgentRole::Planner).count()
    }

    pub fn arguments_for(&self, tool: AgentRole) -> impl Iterator<Item = &str> {
        self.tool_calls.iter().filter(move |c| c.tool == tool).map(|c| c.arguments.as_str())
    }

    /// Checks the structural invariants every produced trace must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        let cfg = &self.config_snapshot;
        if self.tool_calls.len() > cfg.max_tool_calls() {
            return Err(format!(
                "{} tool calls exceed budget {}",
                self.tool_calls.len(),
                cfg.max_tool_calls()
            ));
        }
        if !cfg.tools_enabled && !self.tool_calls.is_empty() {
            return Err("tool calls recorded with tools disabled".into());
        }
        for (i, call) in self.tool_calls.iter().enumerate() {
            if call.index as usize != i + 1 {
                return Err(format!("tool call {} carries index {}", i + 1, call.index));
            }
            if !call.tool.is_tool() {
                return Err("planner recorded as a tool".into());
            }
        }
        match self.terminated_by {
            Termination::BudgetExhausted => {
                if self.predicted_answer != TOOL_CALL_PLACEHOLDER {
                    return Err("budget exhaustion must predict the placeholder".into());
                }
                if self.tool_calls.len() != cfg.max_tool_calls() {
                    return Err("budget exhaustion with unspent budget".into());
                }
            }
            Termination::FinalAnswer => {
                if self.predicted_answer != self.final_answer {
                    return Err("final answer and prediction differ".into());
                }
            }
            Termination::BackendError => {
                if self.predicted_answer != BACKEND_ERROR_ANSWER {
                    return Err("backend failure must predict BACKEND_ERROR".into());
                }
            }
        }
        Ok(())
    }
}

/// Serializes a `Duration` as integer milliseconds.
pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}
