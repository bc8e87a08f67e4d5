//! Planner output grammar.
//!
//! A planner turn is exactly one of:
//!
//! ```text
//! <tool_call>{"name": "web_search|code|mind_map", "arguments": {"query"|"task": "..."}}</tool_call>
//! FINAL ANSWER: <text>
//! ```
//!
//! The first well-formed tool block wins. A final answer is the last line
//! starting with `FINAL ANSWER:`. When both are present, whichever starts
//! earlier in the output wins. Anything else is `Malformed`.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::split_thinking;
use crate::types::{AgentRole, TOOL_CALL_PLACEHOLDER};

const OPEN_TAG: &str = "<tool_call>";
const CLOSE_TAG: &str = "</tool_call>";
const ANSWER_PREFIX: &str = "FINAL ANSWER:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedReason {
    EmptyOutput,
    UnterminatedBlock,
    InvalidPayload(String),
    UnknownTool(String),
    EmptyArguments,
    /// A final answer that itself contains a tool-call tag.
    AnswerContainsToolTag,
    /// A tool invocation while tools are disabled for the run.
    ToolsDisabled,
    NoDirective,
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MalformedReason::EmptyOutput => f.write_str("empty output"),
            MalformedReason::UnterminatedBlock => f.write_str("unterminated block"),
            MalformedReason::InvalidPayload(e) => write!(f, "invalid tool call payload: {e}"),
            MalformedReason::UnknownTool(n) => write!(f, "unknown tool `{n}`"),
            MalformedReason::EmptyArguments => f.write_str("tool call arguments are empty"),
            MalformedReason::AnswerContainsToolTag => f.write_str("final answer contains a tool call tag"),
            MalformedReason::ToolsDisabled => f.write_str("tools are not available in this run"),
            MalformedReason::NoDirective => f.write_str("no tool call or final answer found"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannerDirective {
    ToolInvocation { tool: AgentRole, arguments: String },
    FinalAnswer { text: String },
    Malformed { reason: MalformedReason },
}

impl PlannerDirective {
    /// Canonical text for a tool invocation; `None` for other variants.
    pub fn render(&self) -> Option<String> {
        match self {
            PlannerDirective::ToolInvocation { tool, arguments } => Some(render_tool_call(*tool, arguments)),
            PlannerDirective::FinalAnswer { text } => Some(format!("{ANSWER_PREFIX} {text}")),
            PlannerDirective::Malformed { .. } => None,
        }
    }
}

/// Argument key the canonical rendering uses for a tool.
pub fn argument_key(tool: AgentRole) -> &'static str {
    match tool {
        AgentRole::Coder => "task",
        _ => "query",
    }
}

pub fn render_tool_call(tool: AgentRole, arguments: &str) -> String {
    let name = tool.tool_name().expect("planner is not a tool");
    let mut args = serde_json::Map::new();
    args.insert(argument_key(tool).to_string(), Value::String(arguments.to_string()));
    let payload = serde_json::json!({"name": name, "arguments": args}).to_string();
    // Keep tags inside string values from closing the block early.
    let payload = payload.replace('<', "\\u003c").replace('>', "\\u003e");
    format!("{OPEN_TAG}{payload}{CLOSE_TAG}")
}

/// Parses raw bytes, replacing invalid UTF-8 first.
pub fn parse_directive_bytes(raw: &[u8]) -> PlannerDirective {
    parse_directive(&String::from_utf8_lossy(raw))
}

pub fn parse_directive(raw_output: &str) -> PlannerDirective {
    let (content, _) = split_thinking(raw_output);
    if content.trim().is_empty() {
        return malformed(MalformedReason::EmptyOutput);
    }

    let scan = scan_tool_blocks(&content);
    let answer = last_answer_line(&content);

    match (scan.first_valid, answer) {
        (Some((tool_at, tool, arguments)), Some((answer_at, _))) if tool_at < answer_at => {
            PlannerDirective::ToolInvocation { tool, arguments }
        }
        (Some((_, tool, arguments)), None) => PlannerDirective::ToolInvocation { tool, arguments },
        (_, Some((_, text))) => {
            if text.contains(OPEN_TAG) || text.contains(CLOSE_TAG) {
                malformed(MalformedReason::AnswerContainsToolTag)
            } else {
                PlannerDirective::FinalAnswer { text }
            }
        }
        (None, None) => malformed(scan.first_problem.unwrap_or(MalformedReason::NoDirective)),
    }
}

fn malformed(reason: MalformedReason) -> PlannerDirective {
    PlannerDirective::Malformed { reason }
}

struct BlockScan {
    first_valid: Option<(usize, AgentRole, String)>,
    first_problem: Option<MalformedReason>,
}

fn scan_tool_blocks(content: &str) -> BlockScan {
    let mut scan = BlockScan { first_valid: None, first_problem: None };
    let mut from = 0;
    while let Some(rel) = content[from..].find(OPEN_TAG) {
        let start = from + rel;
        let body_start = start + OPEN_TAG.len();
        let Some(close_rel) = content[body_start..].find(CLOSE_TAG) else {
            scan.first_problem.get_or_insert(MalformedReason::UnterminatedBlock);
            break;
        };
        let body = &content[body_start..body_start + close_rel];
        match parse_block(body) {
            Ok((tool, arguments)) => {
                scan.first_valid = Some((start, tool, arguments));
                break;
            }
            Err(reason) => {
                scan.first_problem.get_or_insert(reason);
            }
        }
        from = body_start + close_rel + CLOSE_TAG.len();
    }
    scan
}

fn parse_block(body: &str) -> Result<(AgentRole, String), MalformedReason> {
    let value: Value =
        serde_json::from_str(body.trim()).map_err(|e| MalformedReason::InvalidPayload(e.to_string()))?;
    let name = value
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| MalformedReason::InvalidPayload("missing string field `name`".into()))?;
    let tool = AgentRole::from_tool_name(name).ok_or_else(|| MalformedReason::UnknownTool(name.to_string()))?;
    let args = value
        .get("arguments")
        .and_then(Value::as_object)
        .ok_or_else(|| MalformedReason::InvalidPayload("missing object field `arguments`".into()))?;
    let text = args
        .get("query")
        .or_else(|| args.get("task"))
        .and_then(Value::as_str)
        .ok_or_else(|| MalformedReason::InvalidPayload("arguments need a `query` or `task` string".into()))?;
    let text = text.trim();
    if text.is_empty() {
        return Err(MalformedReason::EmptyArguments);
    }
    Ok((tool, text.to_string()))
}

/// Byte offset and text of the last `FINAL ANSWER:` line with non-empty text.
fn last_answer_line(content: &str) -> Option<(usize, String)> {
    let mut found = None;
    let mut offset = 0;
    for line in content.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix(ANSWER_PREFIX) {
            let text = rest.trim();
            if !text.is_empty() {
                found = Some((offset + (line.len() - trimmed.len()), text.to_string()));
            }
        }
        offset += line.len();
    }
    found
}

/// True when a recorded answer is the non-termination placeholder.
pub fn is_placeholder(answer: &str) -> bool {
    answer == TOOL_CALL_PLACEHOLDER
}
