//! Failure and benefit labels for single traces and for paired
//! no-thinking / thinking runs of the same task.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::Verdict;
use crate::text::token_set;
use crate::types::{AgentRole, AnswerShape, Task, Termination, Trace};

/// How two search queries are judged near-duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "threshold", rename_all = "snake_case")]
pub enum NearDuplicate {
    /// |A ∩ B| / min(|A|, |B|) over content-token sets.
    Overlap(f64),
    /// |A ∩ B| / |A ∪ B| over content-token sets.
    Jaccard(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub thrash_min: usize,
    pub duplicate_ratio: f64,
    pub near_duplicate: NearDuplicate,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { thrash_min: 5, duplicate_ratio: 0.3, near_duplicate: NearDuplicate::Overlap(0.8) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureKind {
    ToolOmission,
    OverSearchThrashing,
    NonTermination,
    OutputContractDrift,
    None,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evidence {
    pub search_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duplicate_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape_violation: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub omitted_tools: Vec<AgentRole>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureLabel {
    pub kind: FailureKind,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BenefitLabel {
    Decomposition,
    ConstraintPreservation,
    InstructionAdherence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// No-thinking correct, thinking wrong.
    Regression,
    /// No-thinking wrong, thinking correct.
    Improvement,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedFinding {
    pub task_id: String,
    pub direction: Direction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureLabel>,
    pub benefits: Vec<BenefitLabel>,
    pub nt_calls: BTreeMap<AgentRole, usize>,
    pub t_calls: BTreeMap<AgentRole, usize>,
    pub nt_predicted: String,
    pub t_predicted: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("pair does not describe one task: {0}")]
    TaskMismatch(String),
}

pub fn classify_trace(trace: &Trace, task: &Task, thresholds: &Thresholds) -> FailureLabel {
    let queries: Vec<&str> = trace.arguments_for(AgentRole::WebSearch).collect();
    let mut evidence = Evidence { search_calls: queries.len(), ..Evidence::default() };
    let label = |kind, evidence| FailureLabel { kind, evidence };

    match trace.terminated_by {
        Termination::BudgetExhausted => return label(FailureKind::NonTermination, evidence),
        // Infrastructure faults are not behaviour; leave them unlabelled.
        Termination::BackendError => return label(FailureKind::None, evidence),
        Termination::FinalAnswer => {}
    }
    if let Some(shape) = task.answer_shape {
        if let Some(violation) = shape_violation(&trace.predicted_answer, &task.gold_answer, shape) {
            evidence.shape_violation = Some(violation);
            return label(FailureKind::OutputContractDrift, evidence);
        }
    }
    if !queries.is_empty() {
        let ratio = duplicate_query_ratio(&queries, thresholds.near_duplicate);
        evidence.duplicate_ratio = Some(ratio);
        if queries.len() >= thresholds.thrash_min && ratio >= thresholds.duplicate_ratio {
            return label(FailureKind::OverSearchThrashing, evidence);
        }
    }
    label(FailureKind::None, evidence)
}

/// Describes how `answer` breaks `shape`, or `None` when it conforms.
pub fn shape_violation(answer: &str, gold: &str, shape: AnswerShape) -> Option<String> {
    let a = answer.trim();
    if shape != AnswerShape::FreeText {
        for mark in ["#", "- ", "* ", "```", ">"] {
            if a.starts_with(mark) {
                return Some(format!("answer starts with markup {mark:?}"));
            }
        }
    }
    let plain: String = a.chars().filter(|c| *c != ',').collect();
    match shape {
        AnswerShape::FreeText => None,
        AnswerShape::Integer => plain.parse::<i64>().is_err().then(|| "not an integer".to_string()),
        AnswerShape::Decimal => {
            let ok = plain.parse::<f64>().map(f64::is_finite).unwrap_or(false);
            (!ok).then(|| "not a decimal number".to_string())
        }
        AnswerShape::CommaList => {
            let want = gold.split(',').count();
            let got = a.split(',').count();
            (want != got).then(|| format!("list has {got} items, expected {want}"))
        }
        AnswerShape::CodeToken(len) => {
            let n = a.chars().count();
            if n != len {
                Some(format!("token has {n} characters, expected {len}"))
            } else if !a.chars().all(char::is_alphanumeric) {
                Some("token is not alphanumeric".to_string())
            } else {
                None
            }
        }
    }
}

/// Fraction of queries that are a near-duplicate of some earlier query.
pub fn duplicate_query_ratio(queries: &[&str], rule: NearDuplicate) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let sets: Vec<BTreeSet<String>> = queries.iter().map(|q| token_set(q)).collect();
    let duplicates = (1..sets.len()).filter(|&i| sets[..i].iter().any(|earlier| near_duplicate(&sets[i], earlier, rule))).count();
    duplicates as f64 / queries.len() as f64
}

fn near_duplicate(a: &BTreeSet<String>, b: &BTreeSet<String>, rule: NearDuplicate) -> bool {
    if a.is_empty() || b.is_empty() {
        return a == b;
    }
    let shared = a.intersection(b).count() as f64;
    match rule {
        NearDuplicate::Overlap(t) => shared / a.len().min(b.len()) as f64 >= t,
        NearDuplicate::Jaccard(t) => shared / a.union(b).count() as f64 >= t,
    }
}

pub fn call_counts(trace: &Trace) -> BTreeMap<AgentRole, usize> {
    AgentRole::TOOLS.iter().map(|&t| (t, trace.calls_to(t))).collect()
}

pub fn classify_pair(
    nt: &Trace,
    t: &Trace,
    task: &Task,
    nt_verdict: &Verdict,
    t_verdict: &Verdict,
    thresholds: &Thresholds,
) -> Result<PairedFinding, ClassifyError> {
    for (what, id) in [("no-thinking trace", &nt.task_id), ("thinking trace", &t.task_id), ("no-thinking verdict", &nt_verdict.task_id), ("thinking verdict", &t_verdict.task_id)] {
        if *id != task.id {
            return Err(ClassifyError::TaskMismatch(format!("{what} is for {id}, task is {}", task.id)));
        }
    }
    let nt_calls = call_counts(nt);
    let t_calls = call_counts(t);
    let direction = match (nt_verdict.correct, t_verdict.correct) {
        (true, false) => Direction::Regression,
        (false, true) => Direction::Improvement,
        _ => Direction::Unchanged,
    };

    let mut failure = None;
    let mut benefits = Vec::new();
    match direction {
        Direction::Regression => {
            let omitted: Vec<AgentRole> =
                AgentRole::TOOLS.iter().copied().filter(|tool| nt_calls[tool] > 0 && t_calls[tool] < nt_calls[tool]).collect();
            failure = Some(if omitted.is_empty() {
                classify_trace(t, task, thresholds)
            } else {
                let mut label = classify_trace(t, task, thresholds);
                label.kind = FailureKind::ToolOmission;
                label.evidence.omitted_tools = omitted;
                label
            });
        }
        Direction::Improvement => {
            let kinds = |c: &BTreeMap<AgentRole, usize>| c.values().filter(|&&n| n > 0).count();
            if kinds(&t_calls) > kinds(&nt_calls) {
                benefits.push(BenefitLabel::Decomposition);
            }
            if is_power_of_ten_scale(&nt.predicted_answer, &task.gold_answer) {
                benefits.push(BenefitLabel::ConstraintPreservation);
            }
            if kinds(&t_calls) == 0 && kinds(&nt_calls) == 0 {
                benefits.push(BenefitLabel::InstructionAdherence);
            }
        }
        Direction::Unchanged => {}
    }
    Ok(PairedFinding {
        task_id: task.id.clone(),
        direction,
        failure,
        benefits,
        nt_calls,
        t_calls,
        nt_predicted: nt.predicted_answer.clone(),
        t_predicted: t.predicted_answer.clone(),
    })
}

/// True when `predicted = gold * 10^k` exactly for some k in ±1..=6.
pub fn is_power_of_ten_scale(predicted: &str, gold: &str) -> bool {
    let (Some(p), Some(g)) = (plain_number(predicted), plain_number(gold)) else { return false };
    if p == 0.0 || g == 0.0 {
        return false;
    }
    (1..=6).any(|k| {
        let f = 10f64.powi(k);
        p == g * f || p * f == g
    })
}

fn plain_number(s: &str) -> Option<f64> {
    let cleaned: String = s.trim().chars().filter(|c| *c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}
