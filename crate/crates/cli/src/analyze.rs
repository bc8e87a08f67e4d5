use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use toolthink::eval::{aggregate, judge, load_dataset, render_table, AccuracyReport, Verdict};
use toolthink::rundir::read_run_dir;
use toolthink::telemetry::{
    classify_pair, classify_trace, usage_stats, Direction, FailureKind, FailureLabel, NearDuplicate, PairedFinding,
    Thresholds, ToolUsageStats, UsageBreakdown,
};
use toolthink::{AgentRole, Task, Trace};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run directory; with a second directory this is the no-thinking baseline
    #[arg(value_name = "RUN_DIR")]
    run: PathBuf,
    /// Thinking run over the same tasks, for paired findings
    #[arg(value_name = "PAIRED_RUN_DIR")]
    paired: Option<PathBuf>,
    /// Task file holding levels and gold answers
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Directory for the report and CSV files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Search calls at or above which a trace may be thrashing
    #[arg(long, default_value_t = 5)]
    thrash_min: usize,
    /// Share of near-duplicate query pairs that marks thrashing
    #[arg(long, default_value_t = 0.3)]
    duplicate_ratio: f64,
    /// Token-set similarity used to compare search queries
    #[arg(long, value_enum, default_value_t = Rule::Overlap)]
    near_duplicate: Rule,
    /// Similarity at or above which two queries are near-duplicates
    #[arg(long, default_value_t = 0.8)]
    near_duplicate_threshold: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rule {
    Overlap,
    Jaccard,
}

impl AnalyzeArgs {
    fn thresholds(&self) -> anyhow::Result<Thresholds> {
        for (name, v) in [("duplicate ratio", self.duplicate_ratio), ("near-duplicate threshold", self.near_duplicate_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                bail!("{name} must lie in [0, 1], got {v}");
            }
        }
        let t = self.near_duplicate_threshold;
        Ok(Thresholds {
            thrash_min: self.thrash_min,
            duplicate_ratio: self.duplicate_ratio,
            near_duplicate: match self.near_duplicate {
                Rule::Overlap => NearDuplicate::Overlap(t),
                Rule::Jaccard => NearDuplicate::Jaccard(t),
            },
        })
    }
}

struct Run {
    label: String,
    traces: Vec<Trace>,
    verdicts: Vec<Verdict>,
    labels: Vec<FailureLabel>,
    accuracy: AccuracyReport,
    usage: ToolUsageStats,
}

fn load_run(dir: &Path, tasks: &HashMap<&str, &Task>, all_tasks: &[Task], thresholds: &Thresholds) -> anyhow::Result<Run> {
    let traces: Vec<Trace> = read_run_dir(dir)?.into_iter().map(|(_, t)| t).collect();
    let orphans: Vec<&str> = traces.iter().map(|t| t.task_id.as_str()).filter(|id| !tasks.contains_key(id)).collect();
    if !orphans.is_empty() {
        bail!("{}: task ids not in the dataset: {}", dir.display(), orphans.join(", "));
    }
    let verdicts: Vec<Verdict> = traces.iter().map(|t| judge(tasks[t.task_id.as_str()], &t.predicted_answer)).collect();
    let labels = traces.iter().map(|t| classify_trace(t, tasks[t.task_id.as_str()], thresholds)).collect();
    let accuracy = aggregate(&verdicts, all_tasks).with_context(|| dir.display().to_string())?;
    let usage = usage_stats(&traces, all_tasks).with_context(|| dir.display().to_string())?;
    Ok(Run { label: traces[0].config_snapshot.label(), traces, verdicts, labels, accuracy, usage })
}

fn tool(role: AgentRole) -> &'static str {
    role.tool_name().expect("tool role")
}

fn usage_cells(u: &UsageBreakdown) -> Vec<String> {
    let mut cells = vec![u.traces.to_string(), u.total_calls.to_string(), format!("{:.2}", u.mean_calls())];
    cells.extend(AgentRole::TOOLS.iter().map(|t| u.counts[t].to_string()));
    cells.extend(AgentRole::TOOLS.iter().map(|t| u.share(*t).map_or_else(String::new, |s| s.to_string())));
    cells
}

fn usage_header(lead: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.extend(["traces", "total_calls", "mean_calls"].map(String::from));
    h.extend(AgentRole::TOOLS.iter().map(|t| format!("{}_calls", tool(*t))));
    h.extend(AgentRole::TOOLS.iter().map(|t| format!("{}_share_pct", tool(*t))));
    h
}

fn write_csv(path: &Path, rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn kind_name(kind: FailureKind) -> String {
    format!("{kind:?}")
}

fn write_tables(out: &Path, runs: &[Run]) -> anyhow::Result<()> {
    let mut rows = vec![usage_header(&["config"])];
    rows.extend(runs.iter().map(|r| [vec![r.label.clone()], usage_cells(&r.usage.overall)].concat()));
    write_csv(&out.join("usage_by_config.csv"), rows)?;

    let mut rows = vec![usage_header(&["config", "level"])];
    for r in runs {
        for (level, u) in &r.usage.per_level {
            rows.push([vec![r.label.clone(), level.to_string()], usage_cells(u)].concat());
        }
    }
    write_csv(&out.join("usage_by_level.csv"), rows)?;

    let mut rows = vec![["config", "scope", "n", "correct", "accuracy_pct", "mean_calls"].map(String::from).to_vec()];
    for r in runs {
        let a = &r.accuracy;
        rows.push(vec![
            r.label.clone(),
            "all".into(),
            a.n_total.to_string(),
            a.correct_total.to_string(),
            a.acc_overall.to_string(),
            format!("{:.2}", r.usage.overall.mean_calls()),
        ]);
        for (level, n) in &a.n_per_level {
            rows.push(vec![
                r.label.clone(),
                format!("L{level}"),
                n.to_string(),
                a.correct_per_level[level].to_string(),
                a.acc_per_level[level].to_string(),
                r.usage.per_level.get(level).map_or_else(String::new, |u| format!("{:.2}", u.mean_calls())),
            ]);
        }
    }
    write_csv(&out.join("accuracy_and_calls.csv"), rows)?;

    let mut rows = vec![[
        "config",
        "task_id",
        "correct",
        "terminated_by",
        "label",
        "search_calls",
        "duplicate_ratio",
        "shape_violation",
    ]
    .map(String::from)
    .to_vec()];
    for r in runs {
        for ((trace, verdict), label) in r.traces.iter().zip(&r.verdicts).zip(&r.labels) {
            let ev = &label.evidence;
            rows.push(vec![
                r.label.clone(),
                trace.task_id.clone(),
                verdict.correct.to_string(),
                serde_json::to_value(trace.terminated_by)?.as_str().unwrap_or_default().to_string(),
                kind_name(label.kind),
                ev.search_calls.to_string(),
                ev.duplicate_ratio.map_or_else(String::new, |d| format!("{d:.3}")),
                ev.shape_violation.clone().unwrap_or_default(),
            ]);
        }
    }
    write_csv(&out.join("trace_labels.csv"), rows)
}

/// Paired findings for every task present in both runs, in task-id order.
fn pair_runs(
    nt: &Run,
    t: &Run,
    tasks: &HashMap<&str, &Task>,
    thresholds: &Thresholds,
) -> anyhow::Result<Vec<PairedFinding>> {
    let index = |r: &Run| -> BTreeMap<String, usize> {
        r.traces.iter().enumerate().map(|(i, tr)| (tr.task_id.clone(), i)).collect()
    };
    let (nt_idx, t_idx) = (index(nt), index(t));
    let unpaired: Vec<&str> = nt_idx
        .keys()
        .filter(|id| !t_idx.contains_key(*id))
        .chain(t_idx.keys().filter(|id| !nt_idx.contains_key(*id)))
        .map(String::as_str)
        .collect();
    if !unpaired.is_empty() {
        tracing::warn!("{} tasks appear in only one run and are not paired: {}", unpaired.len(), unpaired.join(", "));
    }
    let mut findings = Vec::new();
    for (id, &i) in &nt_idx {
        let Some(&j) = t_idx.get(id) else { continue };
        findings.push(classify_pair(
            &nt.traces[i],
            &t.traces[j],
            tasks[id.as_str()],
            &nt.verdicts[i],
            &t.verdicts[j],
            thresholds,
        )?);
    }
    Ok(findings)
}

fn report(runs: &[Run], findings: Option<&[PairedFinding]>, thresholds: &Thresholds) -> String {
    let mut md = String::from("# Run analysis\n\n## Accuracy\n\n```\n");
    let rows: Vec<(String, AccuracyReport)> = runs.iter().map(|r| (r.label.clone(), r.accuracy.clone())).collect();
    md.push_str(&render_table(&rows));
    md.push_str("```\n\n## Tool usage\n\n| Config | Traces | Calls | Mean calls |");
    for t in AgentRole::TOOLS {
        let _ = write!(md, " {} share [%] |", tool(t));
    }
    md.push_str("\n|---|---:|---:|---:|---:|---:|---:|\n");
    for r in runs {
        let u = &r.usage.overall;
        let _ = write!(md, "| {} | {} | {} | {:.2} |", r.label, u.traces, u.total_calls, u.mean_calls());
        for t in AgentRole::TOOLS {
            let _ = write!(md, " {} |", u.share(t).map_or_else(|| "-".to_string(), |s| s.to_string()));
        }
        md.push('\n');
    }

    let _ = write!(
        md,
        "\n## Trace labels\n\nThrashing needs at least {} searches with a near-duplicate pair ratio of at least {} ({:?}).\n\n| Config | Label | Traces |\n|---|---|---:|\n",
        thresholds.thrash_min, thresholds.duplicate_ratio, thresholds.near_duplicate
    );
    for r in runs {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for l in &r.labels {
            *counts.entry(kind_name(l.kind)).or_default() += 1;
        }
        for (kind, n) in counts {
            let _ = writeln!(md, "| {} | {kind} | {n} |", r.label);
        }
    }

    if let Some(findings) = findings {
        let count = |d: Direction| findings.iter().filter(|f| f.direction == d).count();
        let _ = write!(
            md,
            "\n## Paired runs\n\n{} tasks paired: {} regressions, {} improvements, {} unchanged.\n",
            findings.len(),
            count(Direction::Regression),
            count(Direction::Improvement),
            count(Direction::Unchanged)
        );
        let changed: Vec<&PairedFinding> = findings.iter().filter(|f| f.direction != Direction::Unchanged).collect();
        if !changed.is_empty() {
            md.push_str("\n| Task | Direction | Failure | Benefits | Baseline answer | Thinking answer |\n|---|---|---|---|---|---|\n");
            for f in changed {
                let failure = f.failure.as_ref().map_or_else(|| "-".to_string(), |l| kind_name(l.kind));
                let benefits: Vec<String> = f.benefits.iter().map(|b| format!("{b:?}")).collect();
                let benefits = if benefits.is_empty() { "-".to_string() } else { benefits.join(", ") };
                let direction = match f.direction {
                    Direction::Regression => "regression",
                    Direction::Improvement => "improvement",
                    Direction::Unchanged => "unchanged",
                };
                let _ = writeln!(
                    md,
                    "| {} | {direction} | {failure} | {benefits} | {} | {} |",
                    f.task_id,
                    cell(&f.nt_predicted),
                    cell(&f.t_predicted)
                );
            }
        }
    }
    md
}

/// Keeps a table cell on one line and its pipes literal.
fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

pub fn analyze(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let thresholds = args.thresholds()?;
    let all_tasks =
        load_dataset(&args.dataset).with_context(|| format!("cannot load dataset {}", args.dataset.display()))?;
    let tasks: HashMap<&str, &Task> = all_tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut runs = vec![load_run(&args.run, &tasks, &all_tasks, &thresholds)?];
    if let Some(dir) = &args.paired {
        runs.push(load_run(dir, &tasks, &all_tasks, &thresholds)?);
        if runs[0].label == runs[1].label {
            for (run, dir) in runs.iter_mut().zip([&args.run, dir]) {
                run.label = format!("{} ({})", run.label, crate::dir_label(dir));
            }
        }
    }

    crate::create_out_dir(&args.out)?;
    write_tables(&args.out, &runs)?;
    let findings = match runs.as_slice() {
        [nt, t] => Some(pair_runs(nt, t, &tasks, &thresholds)?),
        _ => None,
    };
    if let Some(findings) = &findings {
        let mut lines = String::new();
        for f in findings.iter().filter(|f| f.direction != Direction::Unchanged) {
            lines.push_str(&serde_json::to_string(f)?);
            lines.push('\n');
        }
        let path = args.out.join("pairs.jsonl");
        std::fs::write(&path, lines).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let path = args.out.join("report.md");
    std::fs::write(&path, report(&runs, findings.as_deref(), &thresholds))
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("analysis written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}
