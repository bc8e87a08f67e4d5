//! Tool-usage counts and shares.
//!
//! Shares are held in tenths of a percent and apportioned by largest
//! remainder, so the shares of one breakdown always add up to exactly
//! 100.0 when any call was made.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::types::{AgentRole, Level, Task, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Share(pub u32);

impl Share {
    pub fn tenths(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for Share {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(f64::from(self.0) / 10.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UsageError {
    #[error("no traces to summarise")]
    EmptyInput,
    #[error("trace for unknown task {0}")]
    UnknownTask(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct UsageBreakdown {
    pub counts: BTreeMap<AgentRole, usize>,
    pub total_calls: usize,
    /// Empty when no calls were made.
    pub shares: BTreeMap<AgentRole, Share>,
    pub traces: usize,
}

impl UsageBreakdown {
    fn from_counts(counts: BTreeMap<AgentRole, usize>, traces: usize) -> Self {
        let total_calls = counts.values().sum();
        let ordered: Vec<usize> = AgentRole::TOOLS.iter().map(|t| counts[t]).collect();
        let shares = apportion_tenths(&ordered)
            .map(|s| AgentRole::TOOLS.iter().copied().zip(s.into_iter().map(Share)).collect())
            .unwrap_or_default();
        UsageBreakdown { counts, total_calls, shares, traces }
    }

    pub fn share(&self, tool: AgentRole) -> Option<Share> {
        self.shares.get(&tool).copied()
    }

    pub fn mean_calls(&self) -> f64 {
        if self.traces == 0 {
            0.0
        } else {
            self.total_calls as f64 / self.traces as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToolUsageStats {
    pub overall: UsageBreakdown,
    pub per_level: BTreeMap<Level, UsageBreakdown>,
}

pub fn usage_stats(traces: &[Trace], tasks: &[Task]) -> Result<ToolUsageStats, UsageError> {
    if traces.is_empty() {
        return Err(UsageError::EmptyInput);
    }
    let levels: HashMap<&str, Level> = tasks.iter().map(|t| (t.id.as_str(), t.level)).collect();
    let zero = || AgentRole::TOOLS.iter().map(|t| (*t, 0usize)).collect::<BTreeMap<_, _>>();
    let mut overall = zero();
    let mut per_level: BTreeMap<Level, (BTreeMap<AgentRole, usize>, usize)> = BTreeMap::new();
    for trace in traces {
        let level =
            *levels.get(trace.task_id.as_str()).ok_or_else(|| UsageError::UnknownTask(trace.task_id.clone()))?;
        let slot = per_level.entry(level).or_insert_with(|| (zero(), 0));
        slot.1 += 1;
        for call in &trace.tool_calls {
            *overall.get_mut(&call.tool).expect("tool role") += 1;
            *slot.0.get_mut(&call.tool).expect("tool role") += 1;
        }
    }
    Ok(ToolUsageStats {
        overall: UsageBreakdown::from_counts(overall, traces.len()),
        per_level: per_level.into_iter().map(|(l, (c, n))| (l, UsageBreakdown::from_counts(c, n))).collect(),
    })
}

/// Splits 1000 tenths of a percent across `counts` by largest remainder.
/// Ties go to the earlier entry. `None` when all counts are zero.
pub fn apportion_tenths(counts: &[usize]) -> Option<Vec<u32>> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return None;
    }
    let mut shares: Vec<u32> = counts.iter().map(|&c| (c as u64 * 1000 / total) as u32).collect();
    let remainders: Vec<u64> = counts.iter().map(|&c| c as u64 * 1000 % total).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    let missing = 1000 - shares.iter().sum::<u32>();
    for &i in order.iter().take(missing as usize) {
        shares[i] += 1;
    }
    Some(shares)
}
