//! Accuracy aggregation, overall and per level.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::scoring::Verdict;
use crate::types::{Level, Task};

/// A percentage held as exact hundredths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Percent(pub u32);

impl Percent {
    /// `100 * correct / total`, rounded half-up to two decimals.
    pub fn from_counts(correct: usize, total: usize) -> Percent {
        if total == 0 {
            return Percent(0);
        }
        let (c, t) = (correct as u64, total as u64);
        Percent(((2 * c * 10_000 + t) / (2 * t)) as u32)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }

    /// Parses "25.45" style text (at most two decimals).
    pub fn parse(text: &str) -> Option<Percent> {
        let (whole, frac) = text.trim().split_once('.').unwrap_or((text.trim(), ""));
        if frac.len() > 2 || whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let frac = format!("{frac:0<2}");
        Some(Percent(whole.parse::<u32>().ok()? * 100 + frac.parse::<u32>().ok()?))
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom(format!("percentage {v} out of range")));
        }
        Ok(Percent((v * 100.0).round() as u32))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("verdict for unknown task {0}")]
    UnknownTask(String),
    #[error("more than one verdict for task {0}")]
    DuplicateVerdict(String),
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub acc_overall: Percent,
    pub acc_per_level: BTreeMap<Level, Percent>,
    pub n_per_level: BTreeMap<Level, usize>,
    pub correct_per_level: BTreeMap<Level, usize>,
    pub n_total: usize,
    pub correct_total: usize,
    /// Label of the configuration that produced the verdicts, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
}

/// Joins verdicts to tasks and aggregates. Each task may have at most one
/// verdict; tasks without a verdict are not counted.
pub fn aggregate(verdicts: &[Verdict], tasks: &[Task]) -> Result<AccuracyReport, ReportError> {
    if verdicts.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let levels: HashMap<&str, Level> = tasks.iter().map(|t| (t.id.as_str(), t.level)).collect();
    let mut seen = HashSet::new();
    let mut per_level: BTreeMap<Level, LevelCounts> = BTreeMap::new();
    for v in verdicts {
        let level = *levels.get(v.task_id.as_str()).ok_or_else(|| ReportError::UnknownTask(v.task_id.clone()))?;
        if !seen.insert(v.task_id.as_str()) {
            return Err(ReportError::DuplicateVerdict(v.task_id.clone()));
        }
        let slot = per_level.entry(level).or_insert(LevelCounts { correct: 0, total: 0 });
        slot.total += 1;
        slot.correct += usize::from(v.correct);
    }
    let correct = per_level.values().map(|c| c.correct).sum();
    let total = per_level.values().map(|c| c.total).sum();
    aggregate_counts(correct, total, &per_level)
}

/// Builds a report from counts, checking that the per-level counts add up
/// to the totals.
pub fn aggregate_counts(
    correct_total: usize,
    n_total: usize,
    per_level: &BTreeMap<Level, LevelCounts>,
) -> Result<AccuracyReport, ReportError> {
    if n_total == 0 {
        return Err(ReportError::EmptyInput);
    }
    let level_correct: usize = per_level.values().map(|c| c.correct).sum();
    let level_total: usize = per_level.values().map(|c| c.total).sum();
    if level_correct != correct_total || level_total != n_total {
        return Err(ReportError::InconsistentCounts(format!(
            "levels give {level_correct}/{level_total}, totals are {correct_total}/{n_total}"
        )));
    }
    if let Some((level, c)) = per_level.iter().find(|(_, c)| c.correct > c.total) {
        return Err(ReportError::InconsistentCounts(format!("level {level}: {} correct of {}", c.correct, c.total)));
    }
    Ok(AccuracyReport {
        acc_overall: Percent::from_counts(correct_total, n_total),
        acc_per_level: per_level.iter().map(|(l, c)| (*l, Percent::from_counts(c.correct, c.total))).collect(),
        n_per_level: per_level.iter().map(|(l, c)| (*l, c.total)).collect(),
        correct_per_level: per_level.iter().map(|(l, c)| (*l, c.correct)).collect(),
        n_total,
        correct_total,
        config: None,
    })
}

/// Aligned table with one row per labelled report: overall accuracy, then
/// each level, then the task count.
pub fn render_table(rows: &[(String, AccuracyReport)]) -> String {
    let header = ["Config", "ACC [%]", "L1 [%]", "L2 [%]", "L3 [%]", "N"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (label, r) in rows {
        let mut row = vec![label.clone(), r.acc_overall.to_string()];
        for level in Level::ALL {
            row.push(r.acc_per_level.get(&level).map_or_else(|| "-".to_string(), Percent::to_string));
        }
        row.push(r.n_total.to_string());
        cells.push(row);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|i| cells.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(n: i64) -> Level {
        Level::new(n).unwrap()
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(Percent::from_counts(42, 165).to_string(), "25.45");
        assert_eq!(Percent::from_counts(1, 8).to_string(), "12.50");
        // 1/16 = 6.25 exactly; 1/80 = 1.25; 1/800 = 0.125 rounds up to 0.13.
        assert_eq!(Percent::from_counts(1, 800).to_string(), "0.13");
        assert_eq!(Percent::from_counts(0, 26).to_string(), "0.00");
        assert_eq!(Percent::from_counts(26, 26).to_string(), "100.00");
    }

    #[test]
    fn percent_parse() {
        assert_eq!(Percent::parse("25.45"), Some(Percent(2545)));
        assert_eq!(Percent::parse("3.5"), Some(Percent(350)));
        assert_eq!(Percent::parse("7"), Some(Percent(700)));
        assert_eq!(Percent::parse("1.234"), None);
        assert_eq!(Percent::parse("-1"), None);
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let per_level = BTreeMap::from([
            (lv(1), LevelCounts { correct: 8, total: 53 }),
            (lv(2), LevelCounts { correct: 3, total: 86 }),
            (lv(3), LevelCounts { correct: 0, total: 26 }),
        ]);
        assert!(matches!(aggregate_counts(9, 165, &per_level), Err(ReportError::InconsistentCounts(_))));
        assert!(aggregate_counts(11, 165, &per_level).is_ok());
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(aggregate(&[], &[]), Err(ReportError::EmptyInput));
    }

    #[test]
    fn table_is_aligned() {
        let per_level = BTreeMap::from([(lv(1), LevelCounts { correct: 1, total: 2 })]);
        let r = aggregate_counts(1, 2, &per_level).unwrap();
        let t = render_table(&[("agentic/none".into(), r)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[1].contains("50.00"));
    }
}
