//! Quasi-exact answer matching.
//!
//! Both sides are trimmed and case-folded, then compared by the first branch
//! that applies:
//!
//! 1. number: thousands separators, currency marks and a trailing `%` are
//!    dropped; if both sides parse, the values must be equal;
//! 2. list (gold contains a comma): items are trimmed and lose a leading
//!    article, then must match pairwise with equal lengths;
//! 3. string: surrounding quotes and a leading article are removed and
//!    whitespace runs collapsed before comparing.
//!
//! Units other than `%` and currency are not stripped.

use serde::{Deserialize, Serialize};

use crate::types::{AnswerShape, Task};

const CURRENCY: [char; 4] = ['$', '€', '£', '¥'];
const ARTICLES: [&str; 3] = ["a ", "an ", "the "];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub task_id: String,
    pub correct: bool,
    pub predicted: String,
    pub gold: String,
    pub normalized_predicted: String,
    pub normalized_gold: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Number,
    List,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub branch: Branch,
    pub normalized_predicted: String,
    pub normalized_gold: String,
    pub equal: bool,
}

/// The answer shape is accepted for interface symmetry but does not change
/// matching; shape violations are a telemetry concern.
pub fn score_answer(predicted: &str, gold: &str, _shape: Option<&AnswerShape>) -> bool {
    compare(predicted, gold).equal
}

pub fn compare(predicted: &str, gold: &str) -> Comparison {
    let p = predicted.trim().to_lowercase();
    let g = gold.trim().to_lowercase();

    if let (Some(pn), Some(gn)) = (parse_number(&p), parse_number(&g)) {
        return Comparison {
            branch: Branch::Number,
            normalized_predicted: pn.to_string(),
            normalized_gold: gn.to_string(),
            equal: pn == gn,
        };
    }
    if g.contains(',') {
        let pl = split_list(&p);
        let gl = split_list(&g);
        return Comparison {
            branch: Branch::List,
            equal: pl == gl,
            normalized_predicted: pl.join(","),
            normalized_gold: gl.join(","),
        };
    }
    let ps = normalize_text(&p);
    let gs = normalize_text(&g);
    Comparison { branch: Branch::Text, equal: ps == gs, normalized_predicted: ps, normalized_gold: gs }
}

pub fn judge(task: &Task, predicted: &str) -> Verdict {
    let c = compare(predicted, &task.gold_answer);
    Verdict {
        task_id: task.id.clone(),
        correct: c.equal,
        predicted: predicted.to_string(),
        gold: task.gold_answer.clone(),
        normalized_predicted: c.normalized_predicted,
        normalized_gold: c.normalized_gold,
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let cleaned: String = s.chars().filter(|c| *c != ',' && !CURRENCY.contains(c)).collect();
    let cleaned = cleaned.trim();
    let cleaned = cleaned.strip_suffix('%').unwrap_or(cleaned).trim();
    // Rust also accepts "inf"/"nan"; those are words, not numbers here.
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn strip_article(s: &str) -> &str {
    ARTICLES.iter().find_map(|a| s.strip_prefix(a)).unwrap_or(s)
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|item| strip_article(item.trim()).trim().to_string()).collect()
}

fn normalize_text(s: &str) -> String {
    let mut t = s;
    for q in ['"', '\'', '“', '‘'] {
        let close = match q {
            '“' => '”',
            '‘' => '’',
            other => other,
        };
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(close) {
            t = &t[q.len_utf8()..t.len() - close.len_utf8()];
            break;
        }
    }
    let collapsed = t.split_whitespace().collect::<Vec<_>>().join(" ");
    strip_article(&collapsed).to_string()
}
