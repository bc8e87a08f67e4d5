use std::collections::BTreeSet;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;
use futures::StreamExt;
use toolthink::eval::load_dataset;
use toolthink::prompts::PromptSet;
use toolthink::rundir::{self, Manifest};
use toolthink::runner::{build_backend, clock_for, stream_tasks};
use toolthink::{Controller, Gateway, GatewayPolicy, Level, Task, Termination, ThinkingPolicy, ToolSuite, Trace};

use crate::config::{self, Overrides};

/// Exit code when at least one task ended in a backend error.
const EXIT_BACKEND: u8 = 2;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; relative paths in it resolve against its directory
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Task file in JSON lines
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Output directory for traces and the manifest
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Chat backend: scripted:<path> or http:<url>
    #[arg(long, env = "TOOLTHINK_BACKEND", value_name = "SPEC")]
    backend: Option<String>,
    /// Model name sent to an http backend
    #[arg(long, env = "TOOLTHINK_MODEL")]
    model: Option<String>,
    /// Whether the planner may call tools
    #[arg(long, env = "TOOLTHINK_TOOLS", value_name = "on|off", value_parser = parse_switch)]
    tools: Option<bool>,
    /// Roles that think: none, planner or full
    #[arg(long, env = "TOOLTHINK_THINKING", value_name = "POLICY")]
    thinking: Option<ThinkingPolicy>,
    /// Tool-call budget per task
    #[arg(long, env = "TOOLTHINK_MAX_TOOL_CALLS", value_name = "N")]
    max_tool_calls: Option<NonZeroU32>,
    /// Decoding seed
    #[arg(long, env = "TOOLTHINK_SEED")]
    seed: Option<u64>,
    /// Directory of search fixture files, replacing the configured provider
    #[arg(long, value_name = "DIR")]
    search_fixtures: Option<PathBuf>,
    /// Directory of role prompt files; defaults to the built-in set
    #[arg(long, value_name = "DIR")]
    prompts: Option<PathBuf>,
    /// Run only the first N selected tasks
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
    /// Run only tasks of this level
    #[arg(long, value_name = "L", value_parser = parse_level)]
    level: Option<Level>,
    /// Run only this task (repeatable)
    #[arg(long = "task-id", value_name = "ID")]
    task_ids: Vec<String>,
    /// Tasks in flight at once; model calls are still serialized
    #[arg(long, env = "TOOLTHINK_WORKERS", default_value_t = 4)]
    workers: usize,
    /// Keep sandbox working directories after each code run
    #[arg(long)]
    keep_sandbox: bool,
    /// Write each task's final mind-map next to its trace
    #[arg(long)]
    dump_mindmap: bool,
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected on or off, got {other:?}")),
    }
}

fn parse_level(s: &str) -> Result<Level, String> {
    let n: i64 = s.parse().map_err(|_| format!("{s:?} is not a level"))?;
    Level::new(n).map_err(|e| e.to_string())
}

fn select(tasks: Vec<Task>, args: &RunArgs) -> anyhow::Result<Vec<Task>> {
    let known: BTreeSet<&str> = tasks.iter().map(|t| t.id.as_str()).collect();
    let missing: Vec<&str> = args.task_ids.iter().map(String::as_str).filter(|id| !known.contains(id)).collect();
    if !missing.is_empty() {
        bail!("task ids not in the dataset: {}", missing.join(", "));
    }
    let wanted: BTreeSet<&str> = args.task_ids.iter().map(String::as_str).collect();
    let selected: Vec<Task> = tasks
        .into_iter()
        .filter(|t| wanted.is_empty() || wanted.contains(t.id.as_str()))
        .filter(|t| args.level.is_none_or(|l| t.level == l))
        .take(args.limit.unwrap_or(usize::MAX))
        .collect();
    if selected.is_empty() {
        bail!("no tasks selected");
    }
    Ok(selected)
}

/// Removes run-dir files left by an earlier run so the directory only
/// describes this one.
fn clear_run_files(dir: &Path) -> anyhow::Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let ours = name == rundir::MANIFEST_FILE
            || (name.ends_with(".json") && (name.starts_with("trace_") || name.starts_with("mindmap_")));
        if ours && path.is_file() {
            std::fs::remove_file(&path).with_context(|| format!("cannot remove {}", path.display()))?;
        }
    }
    Ok(())
}

pub async fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let overrides = Overrides {
        backend: args.backend.clone(),
        model: args.model.clone(),
        tools: args.tools,
        thinking: args.thinking,
        max_tool_calls: args.max_tool_calls,
        seed: args.seed,
        search_fixtures: args.search_fixtures.clone(),
    };
    let config = config::resolve(args.config.as_deref(), &overrides)?;
    let effective = serde_json::to_value(&config)?;
    eprintln!("effective configuration ({}):\n{}", config.label(), serde_json::to_string_pretty(&effective)?);

    let tasks = load_dataset(&args.dataset).with_context(|| format!("cannot load dataset {}", args.dataset.display()))?;
    let tasks = select(tasks, &args)?;
    let prompts = match &args.prompts {
        Some(dir) => PromptSet::load_dir(dir).with_context(|| format!("cannot load prompts from {}", dir.display()))?,
        None => PromptSet::embedded(),
    };
    let prompt_version = prompts.version.clone();
    let built = build_backend(&config.backend).context("cannot set up the chat backend")?;
    let gateway = Gateway::new(built.backend, GatewayPolicy::from_config(&config));
    let tools = if config.tools_enabled {
        Some(ToolSuite::from_config(&config, args.keep_sandbox).context("cannot set up the tool agents")?)
    } else {
        None
    };
    let controller = Controller::new(prompts, clock_for(&config.backend));

    crate::create_out_dir(&args.out)?;
    clear_run_files(&args.out)?;

    let mut traces: Vec<Trace> = Vec::with_capacity(tasks.len());
    let mut results = std::pin::pin!(stream_tasks(&controller, &tasks, &config, &gateway, tools.as_ref(), args.workers));
    while let Some((task, result)) = results.next().await {
        let outcome = result.with_context(|| format!("task {}", task.id))?;
        let path = rundir::write_trace(&args.out, &outcome.trace)?;
        if args.dump_mindmap {
            rundir::write_mindmap(&args.out, &task.id, &outcome.mindmap)?;
        }
        tracing::info!(task = %task.id, terminated_by = ?outcome.trace.terminated_by, file = %path.display(), "task done");
        traces.push(outcome.trace);
    }

    let dataset = args.dataset.display().to_string();
    let manifest = Manifest::new(effective, &prompt_version, &dataset, &traces);
    manifest.write(&args.out)?;
    let totals = &manifest.totals;
    println!(
        "{} tasks, {} tool calls, {} budget exhausted, {} backend errors (prompts {}); run in {}",
        totals.tasks,
        totals.tool_calls,
        totals.budget_exhausted,
        totals.backend_errors,
        prompt_version,
        args.out.display()
    );
    if traces.iter().any(|t| t.terminated_by == Termination::BackendError) {
        return Ok(ExitCode::from(EXIT_BACKEND));
    }
    Ok(ExitCode::SUCCESS)
}
