//! Dataset loading, answer scoring and accuracy aggregation.

pub mod dataset;
pub mod report;
pub mod scoring;

pub use dataset::{level_histogram, load_dataset, parse_dataset, DatasetError};
pub use report::{aggregate, aggregate_counts, render_table, AccuracyReport, LevelCounts, Percent, ReportError};
pub use scoring::{compare, judge, score_answer, Branch, Comparison, Verdict};
