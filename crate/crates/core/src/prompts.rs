//! Role prompt assets and planner context assembly.
//!
//! Assets are plain text files, one per role. The planner asset supports
//! two section markers: `{{#tools}}...{{/tools}}` is kept only when tools
//! are enabled, `{{^tools}}...{{/tools}}` only when they are not.
//! `{{tool_roster}}` expands to one line per available tool.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::types::{AgentRole, Task, ToolCallRecord};

pub const PROMPT_VERSION: &str = "v1";

const EMBEDDED_PLANNER: &str = include_str!("../prompts/v1/planner.txt");
const EMBEDDED_WEB_SEARCH: &str = include_str!("../prompts/v1/web_search.txt");
const EMBEDDED_CODER: &str = include_str!("../prompts/v1/coder.txt");
const EMBEDDED_MIND_MAP: &str = include_str!("../prompts/v1/mind_map.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt asset {0} is missing")]
    MissingPromptAsset(String),
    #[error("prompt asset {asset}: {reason}")]
    Template { asset: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub version: String,
    planner: String,
    web_search: String,
    coder: String,
    mind_map: String,
}

fn asset_file(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Planner => "planner.txt",
        AgentRole::WebSearch => "web_search.txt",
        AgentRole::Coder => "coder.txt",
        AgentRole::MindMap => "mind_map.txt",
    }
}

impl PromptSet {
    /// The assets compiled into the binary.
    pub fn embedded() -> Self {
        PromptSet {
            version: PROMPT_VERSION.to_string(),
            planner: EMBEDDED_PLANNER.to_string(),
            web_search: EMBEDDED_WEB_SEARCH.to_string(),
            coder: EMBEDDED_CODER.to_string(),
            mind_map: EMBEDDED_MIND_MAP.to_string(),
        }
    }

    /// Loads one file per role from `dir`; the directory name is the version.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |role: AgentRole| {
            let path = dir.join(asset_file(role));
            std::fs::read_to_string(&path).map_err(|_| PromptError::MissingPromptAsset(path.display().to_string()))
        };
        let set = PromptSet {
            version: dir.file_name().and_then(|n| n.to_str()).unwrap_or("custom").to_string(),
            planner: read(AgentRole::Planner)?,
            web_search: read(AgentRole::WebSearch)?,
            coder: read(AgentRole::Coder)?,
            mind_map: read(AgentRole::MindMap)?,
        };
        render_sections(&set.planner, true).and(render_sections(&set.planner, false)).map_err(|reason| {
            PromptError::Template { asset: asset_file(AgentRole::Planner).to_string(), reason }
        })?;
        Ok(set)
    }

    pub fn raw(&self, role: AgentRole) -> &str {
        match role {
            AgentRole::Planner => &self.planner,
            AgentRole::WebSearch => &self.web_search,
            AgentRole::Coder => &self.coder,
            AgentRole::MindMap => &self.mind_map,
        }
    }

    /// System prompt for a tool-agent role.
    pub fn tool_system(&self, role: AgentRole) -> &str {
        self.raw(role).trim_end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolePrompt {
    pub system: String,
    pub user: String,
}

/// Builds the prompt for `role`.
///
/// For the planner the system part carries the grammar, roster and output
/// contract, and the user part carries the question followed by one
/// observation block per prior tool call, in call order. Tool agents only
/// receive the planner's arguments, so their user part is left empty for the
/// agent to fill in.
pub fn build_role_prompt(
    prompts: &PromptSet,
    role: AgentRole,
    task: &Task,
    history: &[ToolCallRecord],
    tools_enabled: bool,
) -> Result<RolePrompt, PromptError> {
    if role.is_tool() {
        return Ok(RolePrompt { system: prompts.tool_system(role).to_string(), user: String::new() });
    }
    let system = render_sections(prompts.raw(role), tools_enabled)
        .map_err(|reason| PromptError::Template { asset: asset_file(role).to_string(), reason })?
        .replace("{{tool_roster}}", &tool_roster());
    Ok(RolePrompt { system: system.trim_end().to_string(), user: planner_context(task, history) })
}

fn tool_roster() -> String {
    AgentRole::TOOLS
        .iter()
        .map(|tool| {
            let name = tool.tool_name().unwrap();
            let what = match tool {
                AgentRole::WebSearch => "breaks a query into web searches and returns a grounded summary of the results",
                AgentRole::Coder => "writes and runs a program in a sandbox for exact calculations, data manipulation or parsing",
                AgentRole::MindMap => "files the findings of earlier tool calls into a knowledge graph and returns the notes most related to the query",
                AgentRole::Planner => unreachable!(),
            };
            format!("- {name}: {what}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn planner_context(task: &Task, history: &[ToolCallRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Question:\n{}", task.question.trim());
    if !task.attachments.is_empty() {
        out.push_str("\nAttached files:\n");
        for path in &task.attachments {
            let _ = writeln!(out, "- {}", path.display());
        }
    }
    if !history.is_empty() {
        out.push_str("\nTool results so far:\n");
        for record in history {
            out.push_str(&observation_block(record));
        }
    }
    out.push_str("\nDecide the next step.");
    out
}

pub fn observation_block(record: &ToolCallRecord) -> String {
    format!(
        "<observation index=\"{}\" tool=\"{}\">\narguments: {}\nresult:\n{}\n</observation>\n",
        record.index,
        record.tool.tool_name().unwrap_or("planner"),
        record.arguments,
        record.observation.trim_end(),
    )
}

/// Reminder sent after a planner reply that did not follow the grammar.
pub fn format_reminder(reason: &str, tools_enabled: bool) -> String {
    if tools_enabled {
        format!(
            "Your last reply could not be used ({reason}). Reply with exactly one <tool_call> block, \
             or a single line starting with `FINAL ANSWER:`."
        )
    } else {
        format!(
            "Your last reply could not be used ({reason}). No tools are available. \
             Reply with a single line starting with `FINAL ANSWER:`."
        )
    }
}

fn render_sections(template: &str, tools_enabled: bool) -> Result<String, String> {
    #[derive(PartialEq)]
    enum Section {
        Outside,
        Keep,
        Drop,
    }
    let mut out = String::new();
    let mut section = Section::Outside;
    for (lineno, line) in template.lines().enumerate() {
        match line.trim() {
            "{{#tools}}" | "{{^tools}}" if section != Section::Outside => {
                return Err(format!("nested section at line {}", lineno + 1));
            }
            "{{#tools}}" => section = if tools_enabled { Section::Keep } else { Section::Drop },
            "{{^tools}}" => section = if tools_enabled { Section::Drop } else { Section::Keep },
            "{{/tools}}" if section == Section::Outside => {
                return Err(format!("unmatched close at line {}", lineno + 1));
            }
            "{{/tools}}" => section = Section::Outside,
            _ if section == Section::Drop => {}
            _ => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    if section != Section::Outside {
        return Err("unclosed section".into());
    }
    Ok(out)
}
