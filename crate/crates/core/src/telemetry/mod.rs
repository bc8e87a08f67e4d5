//! Tool-usage statistics and trace classification.

pub mod classify;
pub mod usage;

pub use classify::{
    call_counts, classify_pair, classify_trace, duplicate_query_ratio, is_power_of_ten_scale, shape_violation,
    BenefitLabel, ClassifyError, Direction, Evidence, FailureKind, FailureLabel, NearDuplicate, PairedFinding,
    Thresholds,
};
pub use usage::{apportion_tenths, usage_stats, Share, ToolUsageStats, UsageBreakdown, UsageError};
