//! GAIA-layout task files: one JSON object per line.
//!
//! Recognised keys: `task_id`, `Question`, `Level` (number or numeric
//! string), `Final answer`, optional `file_name` (resolved against the
//! dataset's directory) and optional `answer_shape`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::types::{AnswerShape, Level, Task};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: task id {id:?} repeats an earlier record")]
    DuplicateTask { line: usize, id: String },
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Task>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    let tasks = parse_dataset(&text, path.parent())?;
    let histogram = level_histogram(&tasks);
    tracing::info!(path = %path.display(), tasks = tasks.len(), ?histogram, "dataset loaded");
    Ok(tasks)
}

/// Parses dataset text. Attachments are joined onto `base_dir` when given.
pub fn parse_dataset(text: &str, base_dir: Option<&Path>) -> Result<Vec<Task>, DatasetError> {
    let mut tasks = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw).map_err(|e| DatasetError::ParseError { line, reason: e.to_string() })?;
        let Value::Object(record) = value else {
            return Err(DatasetError::ParseError { line, reason: "record is not an object".into() });
        };
        let task = parse_record(&record, line, base_dir)?;
        if !seen.insert(task.id.clone()) {
            return Err(DatasetError::DuplicateTask { line, id: task.id });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

fn parse_record(record: &Map<String, Value>, line: usize, base_dir: Option<&Path>) -> Result<Task, DatasetError> {
    let text_field = |field: &'static str| -> Result<String, DatasetError> {
        match record.get(field) {
            None | Some(Value::Null) => Err(DatasetError::MissingField { line, field }),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            Some(other) => Err(DatasetError::ParseError { line, reason: format!("`{field}` has unexpected value {other}") }),
        }
    };
    let id = text_field("task_id")?;
    let question = text_field("Question")?;
    let level_text = text_field("Level")?;
    let level = level_text
        .trim()
        .parse::<i64>()
        .ok()
        .and_then(|v| Level::new(v).ok())
        .ok_or_else(|| DatasetError::ParseError { line, reason: format!("invalid Level {level_text:?}") })?;
    let gold_answer = text_field("Final answer")?;
    let answer_shape = match record.get("answer_shape") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            s.parse::<AnswerShape>()
                .map_err(|e| DatasetError::ParseError { line, reason: format!("answer_shape: {e}") })?,
        ),
        Some(other) => return Err(DatasetError::ParseError { line, reason: format!("answer_shape {other} is not a string") }),
    };
    let attachments = match record.get("file_name").and_then(Value::as_str).map(str::trim) {
        Some(name) if !name.is_empty() => vec![base_dir.map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))],
        _ => Vec::new(),
    };
    Ok(Task { id, question, level, gold_answer, answer_shape, attachments })
}

pub fn level_histogram(tasks: &[Task]) -> BTreeMap<u8, usize> {
    let mut histogram = BTreeMap::new();
    for task in tasks {
        *histogram.entry(task.level.get()).or_insert(0) += 1;
    }
    histogram
}
