//! Run directory layout: one `trace_<id>.json` per task plus `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::mindmap::KnowledgeGraph;
use crate::types::{AgentRole, Termination, Trace};

pub const MANIFEST_FILE: &str = "manifest.json";
const TRACE_PREFIX: &str = "trace_";

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed trace file {path}: {reason}")]
    MalformedTrace { path: PathBuf, reason: String },
    #[error("malformed predictions file {path}: {reason}")]
    MalformedPredictions { path: PathBuf, reason: String },
    #[error("{0} holds no trace files")]
    Empty(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunDirError + '_ {
    move |source| RunDirError::Io { path: path.to_path_buf(), source }
}

/// Keeps `[A-Za-z0-9._-]`, replaces everything else with `_`.
pub fn sanitize_id(task_id: &str) -> String {
    task_id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' }).collect()
}

pub fn trace_file_name(task_id: &str) -> String {
    format!("{TRACE_PREFIX}{}.json", sanitize_id(task_id))
}

pub fn mindmap_file_name(task_id: &str) -> String {
    format!("mindmap_{}.json", sanitize_id(task_id))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunDirError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_trace(dir: &Path, trace: &Trace) -> Result<PathBuf, RunDirError> {
    let path = dir.join(trace_file_name(&trace.task_id));
    write_json(&path, trace)?;
    Ok(path)
}

pub fn write_mindmap(dir: &Path, task_id: &str, graph: &KnowledgeGraph) -> Result<PathBuf, RunDirError> {
    let path = dir.join(mindmap_file_name(task_id));
    write_json(&path, graph)?;
    Ok(path)
}

pub fn read_trace(path: &Path) -> Result<Trace, RunDirError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| RunDirError::MalformedTrace { path: path.to_path_buf(), reason: e.to_string() })
}

/// Every `trace_*.json` in `dir`, sorted by file name.
pub fn read_run_dir(dir: &Path) -> Result<Vec<(PathBuf, Trace)>, RunDirError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(TRACE_PREFIX) && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(RunDirError::Empty(dir.to_path_buf()));
    }
    paths.into_iter().map(|p| read_trace(&p).map(|t| (p, t))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task_id: String,
    pub trace_file: String,
    pub terminated_by: Termination,
    pub predicted_answer: String,
    pub tool_calls: BTreeMap<AgentRole, usize>,
}

impl ManifestEntry {
    pub fn from_trace(trace: &Trace) -> Self {
        ManifestEntry {
            task_id: trace.task_id.clone(),
            trace_file: trace_file_name(&trace.task_id),
            terminated_by: trace.terminated_by,
            predicted_answer: trace.predicted_answer.clone(),
            tool_calls: AgentRole::TOOLS.iter().map(|&t| (t, trace.calls_to(t))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTotals {
    pub tasks: usize,
    pub tool_calls: usize,
    pub backend_errors: usize,
    pub budget_exhausted: usize,
}

/// Field order is the serialized order: the effective configuration opens
/// the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub effective_config: Value,
    pub prompt_version: String,
    pub dataset: String,
    pub tasks: Vec<ManifestEntry>,
    pub totals: ManifestTotals,
}

impl Manifest {
    pub fn new(effective_config: Value, prompt_version: &str, dataset: &str, traces: &[Trace]) -> Self {
        let tasks: Vec<ManifestEntry> = traces.iter().map(ManifestEntry::from_trace).collect();
        let totals = ManifestTotals {
            tasks: traces.len(),
            tool_calls: traces.iter().map(|t| t.tool_calls.len()).sum(),
            backend_errors: traces.iter().filter(|t| t.terminated_by == Termination::BackendError).count(),
            budget_exhausted: traces.iter().filter(|t| t.terminated_by == Termination::BudgetExhausted).count(),
        };
        Manifest { effective_config, prompt_version: prompt_version.to_string(), dataset: dataset.to_string(), tasks, totals }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, RunDirError> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Manifest, RunDirError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| RunDirError::MalformedTrace { path, reason: e.to_string() })
    }
}

/// Reads a flat predictions file: either one JSON object mapping task id to
/// answer, or JSON lines with `task_id` and `predicted` (or
/// `model_answer`).
pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, String>, RunDirError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |reason: String| RunDirError::MalformedPredictions { path: path.to_path_buf(), reason };
    if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&text) {
        if !map.contains_key("task_id") {
            return map
                .into_iter()
                .map(|(k, v)| match v {
                    Value::String(s) => Ok((k, s)),
                    Value::Number(n) => Ok((k, n.to_string())),
                    other => Err(bad(format!("answer for {k} is {other}"))),
                })
                .collect();
        }
    }
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
        let id = value.get("task_id").and_then(Value::as_str).ok_or_else(|| bad(format!("line {}: no task_id", i + 1)))?;
        let answer = match value.get("predicted").or_else(|| value.get("model_answer")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(bad(format!("line {}: no predicted answer", i + 1))),
        };
        if out.insert(id.to_string(), answer).is_some() {
            return Err(bad(format!("line {}: task {id} repeated", i + 1)));
        }
    }
    Ok(out)
}
