//! Plan-act loop for one task.
//!
//! Each planner round sends the question plus every prior observation,
//! parses the reply and either dispatches one tool call, accepts a final
//! answer, or re-prompts with a format reminder. A round makes at most
//! `soft_retries + 2` planner calls and there are at most
//! `max_tool_calls + 1` rounds, which bounds the loop by construction.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::coding::CodingAgent;
use crate::gateway::{Gateway, GatewayError, Message};
use crate::mindmap::{KnowledgeGraph, MindMapAgent};
use crate::parser::{parse_directive, MalformedReason, PlannerDirective};
use crate::prompts::{build_role_prompt, format_reminder, PromptError, PromptSet};
use crate::search::{provider_from_spec, ProviderError, WebSearchAgent};
use crate::session::ModelSession;
use crate::types::{
    AgentRole, RunConfig, Task, Termination, ToolCallRecord, ToolErrorTag, Trace, BACKEND_ERROR_ANSWER,
    TOOL_CALL_PLACEHOLDER,
};

pub const TOOL_BUDGET_EXHAUSTED: &str = "TOOL_BUDGET_EXHAUSTED";
pub const TOOL_FAILED: &str = "TOOL_FAILED";
pub const TRUNCATION_MARKER: &str = "\n[truncated]";

/// Tool agents shared by every task of a run.
pub struct ToolSuite {
    pub search: WebSearchAgent,
    pub coding: CodingAgent,
}

impl ToolSuite {
    pub fn from_config(config: &RunConfig, keep_sandbox: bool) -> Result<Self, ProviderError> {
        let provider = provider_from_spec(&config.search.provider, config.search.timeout)?;
        Ok(ToolSuite {
            search: WebSearchAgent::new(Arc::from(provider), config.search.max_subqueries, config.search.top_k),
            coding: CodingAgent::new(config.sandbox.clone(), keep_sandbox),
        })
    }
}

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("tools must be supplied exactly when the run enables them (tools_enabled = {tools_enabled})")]
    ToolsMismatch { tools_enabled: bool },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub trace: Trace,
    /// Final state of the task's mind-map.
    pub mindmap: KnowledgeGraph,
}

pub struct Controller {
    prompts: PromptSet,
    clock: Arc<dyn Clock>,
}

impl Controller {
    pub fn new(prompts: PromptSet, clock: Arc<dyn Clock>) -> Self {
        Controller { prompts, clock }
    }

    pub fn with_system_clock(prompts: PromptSet) -> Self {
        Controller::new(prompts, Arc::new(SystemClock::new()))
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    pub async fn run_task(
        &self,
        task: &Task,
        config: &RunConfig,
        gateway: &Gateway,
        tools: Option<&ToolSuite>,
    ) -> Result<TaskOutcome, ControllerError> {
        if tools.is_some() != config.tools_enabled {
            return Err(ControllerError::ToolsMismatch { tools_enabled: config.tools_enabled });
        }
        let system = build_role_prompt(&self.prompts, AgentRole::Planner, task, &[], config.tools_enabled)?.system;
        let mut run = TaskRun {
            controller: self,
            task,
            config,
            tools,
            session: ModelSession::new(gateway, task.id.clone(), config.decoding.clone(), config.seed),
            mindmap: MindMapAgent::new(config.mindmap_top_m),
            calls: Vec::new(),
            per_tool: BTreeMap::new(),
            malformed_turns: 0,
        };
        let ending = run.drive(&system).await?;
        Ok(run.finish(ending))
    }
}

enum Ending {
    Answer(String),
    Budget,
    Backend(GatewayError),
}

struct TaskRun<'a> {
    controller: &'a Controller,
    task: &'a Task,
    config: &'a RunConfig,
    tools: Option<&'a ToolSuite>,
    session: ModelSession<'a>,
    mindmap: MindMapAgent,
    calls: Vec<ToolCallRecord>,
    per_tool: BTreeMap<AgentRole, u32>,
    malformed_turns: u32,
}

impl TaskRun<'_> {
    async fn drive(&mut self, system: &str) -> Result<Ending, ControllerError> {
        let max = self.config.max_tool_calls();
        let planner_thinks = self.config.thinking.thinks(AgentRole::Planner);
        for _round in 0..=max {
            let user = build_role_prompt(
                &self.controller.prompts,
                AgentRole::Planner,
                self.task,
                &self.calls,
                self.config.tools_enabled,
            )?
            .user;
            let directive = match self.planner_round(system, user, planner_thinks).await {
                Ok(d) => d,
                Err(err) => return Ok(Ending::Backend(err)),
            };
            match directive {
                RoundResult::Answer(text) => return Ok(Ending::Answer(text)),
                RoundResult::Tool(tool, arguments) => {
                    if self.calls.len() >= max {
                        return Ok(Ending::Budget);
                    }
                    if let Err(err) = self.dispatch(tool, arguments).await {
                        return Ok(Ending::Backend(err));
                    }
                }
            }
        }
        // Round `max` starts with a spent budget, so any tool request ends
        // the run above and every other outcome returns.
        unreachable!("planner loop exceeded its round bound")
    }

    /// Up to `soft_retries` reminders, then one last re-prompt. A reply that
    /// is still malformed becomes the answer verbatim.
    async fn planner_round(&mut self, system: &str, user: String, thinks: bool) -> Result<RoundResult, GatewayError> {
        let soft = self.config.soft_retries;
        let mut messages = vec![Message::user(user)];
        let mut attempt = 0u32;
        loop {
            let reply = self.session.ask(AgentRole::Planner, system, messages.clone(), thinks).await?;
            let reason = match parse_directive(&reply.content) {
                PlannerDirective::FinalAnswer { text } => return Ok(RoundResult::Answer(text)),
                PlannerDirective::ToolInvocation { tool, arguments } if self.config.tools_enabled => {
                    return Ok(RoundResult::Tool(tool, arguments));
                }
                PlannerDirective::ToolInvocation { .. } => MalformedReason::ToolsDisabled,
                PlannerDirective::Malformed { reason } => reason,
            };
            tracing::debug!(task = %self.task.id, attempt, %reason, "malformed planner output");
            attempt += 1;
            if attempt == soft + 1 {
                self.malformed_turns += 1;
            }
            if attempt > soft + 1 {
                return Ok(RoundResult::Answer(reply.content.trim().to_string()));
            }
            messages.push(Message::assistant(reply.content));
            messages.push(Message::user(format_reminder(&reason.to_string(), self.config.tools_enabled)));
        }
    }

    async fn dispatch(&mut self, tool: AgentRole, arguments: String) -> Result<(), GatewayError> {
        let index = self.calls.len() as u32 + 1;
        let used = self.per_tool.entry(tool).or_insert(0);
        if let Some(&limit) = self.config.per_tool_budget.get(&tool) {
            if *used >= limit {
                self.calls.push(ToolCallRecord {
                    index,
                    tool,
                    arguments,
                    observation: format!("{TOOL_BUDGET_EXHAUSTED}: {}", tool.tool_name().unwrap_or_default()),
                    wall_time: Duration::ZERO,
                    error: Some(ToolErrorTag::PerToolBudget),
                });
                return Ok(());
            }
        }
        *used += 1;

        let tools = self.tools.expect("tools present when enabled");
        let thinks = self.config.thinking.thinks(tool);
        let system = self.controller.prompts.tool_system(tool).to_string();
        let started = self.controller.clock.now();
        let result: Result<(String, Option<ToolErrorTag>), GatewayError> = match tool {
            AgentRole::WebSearch => tools
                .search
                .invoke(&mut self.session, &system, &arguments, thinks)
                .await
                .map(|o| (o.observation, o.error)),
            AgentRole::Coder => tools
                .coding
                .run_coding_task(&mut self.session, &system, &arguments, thinks)
                .await
                .map(|o| (o.observation, o.error)),
            AgentRole::MindMap => self
                .mindmap
                .invoke(&mut self.session, &system, &self.calls, &arguments, thinks)
                .await
                .map(|obs| (obs, None)),
            AgentRole::Planner => unreachable!("parser never yields the planner as a tool"),
        };
        let wall_time = self.controller.clock.now().saturating_sub(started);
        match result {
            Ok((observation, error)) => {
                self.calls.push(ToolCallRecord {
                    index,
                    tool,
                    arguments,
                    observation: truncate_observation(&observation, self.config.observation_byte_cap),
                    wall_time,
                    error,
                });
                Ok(())
            }
            Err(err) => {
                self.calls.push(ToolCallRecord {
                    index,
                    tool,
                    arguments,
                    observation: format!("{TOOL_FAILED}: {err}"),
                    wall_time,
                    error: Some(ToolErrorTag::Backend),
                });
                Err(err)
            }
        }
    }

    fn finish(self, ending: Ending) -> TaskOutcome {
        let (final_answer, terminated_by, predicted_answer) = match ending {
            Ending::Answer(text) => (text.clone(), Termination::FinalAnswer, text),
            Ending::Budget => (String::new(), Termination::BudgetExhausted, TOOL_CALL_PLACEHOLDER.to_string()),
            Ending::Backend(err) => {
                tracing::error!(task = %self.task.id, error = %err, "backend failure ended the run");
                (String::new(), Termination::BackendError, BACKEND_ERROR_ANSWER.to_string())
            }
        };
        let trace = Trace {
            task_id: self.task.id.clone(),
            config_snapshot: self.config.clone(),
            turns: self.session.into_turns(),
            tool_calls: self.calls,
            final_answer,
            terminated_by,
            predicted_answer,
            malformed_turns: self.malformed_turns,
        };
        debug_assert_eq!(trace.check_invariants(), Ok(()));
        TaskOutcome { trace, mindmap: self.mindmap.graph }
    }
}

enum RoundResult {
    Answer(String),
    Tool(AgentRole, String),
}

/// Caps an observation at `cap` bytes (on a char boundary) and marks the cut.
pub fn truncate_observation(observation: &str, cap: usize) -> String {
    if observation.len() <= cap {
        return observation.to_string();
    }
    let mut cut = cap;
    while !observation.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}{TRUNCATION_MARKER}", &observation[..cut])
}

/// Upper bound on planner calls for a budget, given the soft-retry count.
pub fn planner_turn_cap(max_tool_calls: usize, soft_retries: u32) -> usize {
    (max_tool_calls + 1) * (soft_retries as usize + 2)
}
