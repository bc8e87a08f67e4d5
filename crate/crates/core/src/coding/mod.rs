//! Coding agent: program generation, sandboxed execution, one repair retry.

#[cfg(target_os = "linux")]
mod landlock;
pub mod sandbox;

use std::path::PathBuf;

pub use sandbox::{execute, execute_with, Execution, SandboxError, SandboxOptions, SandboxOutcome, SandboxVerdict};

use crate::gateway::{GatewayError, Message};
use crate::session::ModelSession;
use crate::types::{AgentRole, SandboxLimits, ToolErrorTag};

pub const CODE_EXECUTION_FAILED: &str = "CODE_EXECUTION_FAILED";
pub const EMPTY_OUTPUT: &str = "EMPTY_OUTPUT";

/// Stderr is clipped to this many bytes when sent back for repair.
const REPAIR_STDERR_CAP: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingOutcome {
    pub observation: String,
    /// Verdict of the last execution, absent when nothing could be run.
    pub verdict: Option<SandboxVerdict>,
    pub error: Option<ToolErrorTag>,
    pub kept_dirs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CodingAgent {
    pub limits: SandboxLimits,
    pub keep_sandbox: bool,
}

impl CodingAgent {
    pub fn new(limits: SandboxLimits, keep_sandbox: bool) -> Self {
        CodingAgent { limits, keep_sandbox }
    }

    /// Generate, execute, and on failure re-prompt once with the stderr.
    /// Never more than two model calls.
    pub async fn run_coding_task(
        &self,
        session: &mut ModelSession<'_>,
        system_prompt: &str,
        task_text: &str,
        thinking: bool,
    ) -> Result<CodingOutcome, GatewayError> {
        let task_text = task_text.trim();
        if task_text.is_empty() {
            return Err(GatewayError::Precondition("coding task is empty".into()));
        }
        let mut kept_dirs = Vec::new();
        let first_request = Message::user(task_text);
        let first_reply = session.ask(AgentRole::Coder, system_prompt, vec![first_request.clone()], thinking).await?;
        let program = extract_fenced_block(&first_reply.content);

        let first = match self.run(&program, &mut kept_dirs).await {
            Ok(outcome) => outcome,
            Err(err) => return Ok(spawn_failure(err, kept_dirs)),
        };
        if first.verdict == SandboxVerdict::Ok {
            return Ok(success(first, kept_dirs));
        }

        let repair = Message::user(repair_request(&first));
        let messages = vec![first_request, Message::assistant(first_reply.content), repair];
        let second_reply = session.ask(AgentRole::Coder, system_prompt, messages, thinking).await?;
        let program = extract_fenced_block(&second_reply.content);
        let second = match self.run(&program, &mut kept_dirs).await {
            Ok(outcome) => outcome,
            Err(err) => return Ok(spawn_failure(err, kept_dirs)),
        };
        if second.verdict == SandboxVerdict::Ok {
            return Ok(success(second, kept_dirs));
        }
        Ok(CodingOutcome {
            observation: format!("{CODE_EXECUTION_FAILED}: {}", second.verdict),
            verdict: Some(second.verdict),
            error: Some(ToolErrorTag::CodeExecutionFailed),
            kept_dirs,
        })
    }

    async fn run(&self, program: &str, kept: &mut Vec<PathBuf>) -> Result<SandboxOutcome, SandboxError> {
        let run = execute_with(program, &self.limits, &SandboxOptions { keep_dir: self.keep_sandbox }).await?;
        tracing::debug!(verdict = %run.outcome.verdict, wall_ms = run.outcome.wall_time.as_millis() as u64, "sandbox run");
        kept.extend(run.kept_dir);
        Ok(run.outcome)
    }
}

/// Asks the model for a program. Returns the first fenced block of the
/// reply, or the whole reply when it has none.
pub async fn generate_program(
    session: &mut ModelSession<'_>,
    system_prompt: &str,
    task_text: &str,
    thinking: bool,
) -> Result<String, GatewayError> {
    if task_text.trim().is_empty() {
        return Err(GatewayError::Precondition("coding task is empty".into()));
    }
    let reply = session.ask(AgentRole::Coder, system_prompt, vec![Message::user(task_text.trim())], thinking).await?;
    Ok(extract_fenced_block(&reply.content))
}

/// Contents of the first ```-fenced block (language tag dropped), or the
/// whole text when no complete fence exists.
pub fn extract_fenced_block(reply: &str) -> String {
    let mut lines = reply.lines();
    let mut body = Vec::new();
    let mut inside = false;
    for line in lines.by_ref() {
        let trimmed = line.trim_start();
        if !inside {
            if trimmed.starts_with("```") {
                inside = true;
            }
        } else if trimmed.starts_with("```") {
            return body.join("\n");
        } else {
            body.push(line);
        }
    }
    reply.to_string()
}

fn success(outcome: SandboxOutcome, kept_dirs: Vec<PathBuf>) -> CodingOutcome {
    let stdout = outcome.stdout.trim_end();
    if stdout.trim().is_empty() {
        CodingOutcome {
            observation: EMPTY_OUTPUT.to_string(),
            verdict: Some(outcome.verdict),
            error: Some(ToolErrorTag::EmptyOutput),
            kept_dirs,
        }
    } else {
        CodingOutcome { observation: stdout.to_string(), verdict: Some(outcome.verdict), error: None, kept_dirs }
    }
}

fn spawn_failure(err: SandboxError, kept_dirs: Vec<PathBuf>) -> CodingOutcome {
    tracing::warn!(error = %err, "sandbox spawn failed");
    CodingOutcome {
        observation: format!("{CODE_EXECUTION_FAILED}: sandbox_spawn"),
        verdict: None,
        error: Some(ToolErrorTag::SandboxSpawn),
        kept_dirs,
    }
}

fn repair_request(failed: &SandboxOutcome) -> String {
    let stderr = failed.stderr.trim_end();
    let mut cut = stderr.len().saturating_sub(REPAIR_STDERR_CAP);
    while !stderr.is_char_boundary(cut) {
        cut += 1;
    }
    format!(
        "The program failed with verdict {} (exit status {}). Its stderr was:\n{}\nReply with a corrected program.",
        failed.verdict,
        failed.exit_status,
        &stderr[cut..]
    )
}
