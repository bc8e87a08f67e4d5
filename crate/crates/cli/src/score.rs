use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use toolthink::eval::{aggregate, judge, load_dataset, render_table, AccuracyReport, Verdict};
use toolthink::rundir::{load_predictions, read_run_dir};
use toolthink::Task;

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Run directories or prediction files (JSON object or JSON lines)
    #[arg(required = true, value_name = "RUN")]
    inputs: Vec<PathBuf>,
    /// Task file holding the gold answers
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Directory to write score.json into
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Predictions of one run plus the label it is reported under.
pub struct Predictions {
    pub source: PathBuf,
    pub label: String,
    pub answers: BTreeMap<String, String>,
}

pub fn load_input(path: &Path) -> anyhow::Result<Predictions> {
    if path.is_dir() {
        let traces = read_run_dir(path)?;
        let label = traces[0].1.config_snapshot.label();
        let mut answers = BTreeMap::new();
        for (file, trace) in traces {
            if answers.insert(trace.task_id.clone(), trace.predicted_answer).is_some() {
                bail!("{}: task {} appears in more than one trace", file.display(), trace.task_id);
            }
        }
        Ok(Predictions { source: path.to_path_buf(), label, answers })
    } else {
        let answers = load_predictions(path)?;
        if answers.is_empty() {
            bail!("{} holds no predictions", path.display());
        }
        Ok(Predictions { source: path.to_path_buf(), label: crate::dir_label(path), answers })
    }
}

/// Judges every prediction; ids missing from the dataset are an error that
/// lists them all.
pub fn verdicts(predictions: &Predictions, tasks: &[Task]) -> anyhow::Result<Vec<Verdict>> {
    let by_id: HashMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let orphans: Vec<&str> =
        predictions.answers.keys().map(String::as_str).filter(|id| !by_id.contains_key(id)).collect();
    if !orphans.is_empty() {
        bail!(
            "{}: {} task ids not in the dataset: {}",
            predictions.source.display(),
            orphans.len(),
            orphans.join(", ")
        );
    }
    Ok(predictions.answers.iter().map(|(id, answer)| judge(by_id[id.as_str()], answer)).collect())
}

/// Makes labels unique by appending the source name to repeats.
pub fn distinct_labels(runs: &mut [Predictions]) {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for run in runs.iter() {
        *seen.entry(run.label.clone()).or_default() += 1;
    }
    for run in runs.iter_mut() {
        if seen[&run.label] > 1 {
            run.label = format!("{} ({})", run.label, crate::dir_label(&run.source));
        }
    }
}

#[derive(Serialize)]
struct ScoredRun<'a> {
    source: String,
    report: &'a AccuracyReport,
    verdicts: &'a [Verdict],
}

pub fn score(args: ScoreArgs) -> anyhow::Result<ExitCode> {
    let tasks = load_dataset(&args.dataset).with_context(|| format!("cannot load dataset {}", args.dataset.display()))?;
    let mut runs = args.inputs.iter().map(|p| load_input(p)).collect::<anyhow::Result<Vec<_>>>()?;
    distinct_labels(&mut runs);
    let mut rows = Vec::with_capacity(runs.len());
    let mut all_verdicts = Vec::with_capacity(runs.len());
    for run in &runs {
        let verdicts = verdicts(run, &tasks)?;
        let mut report = aggregate(&verdicts, &tasks).with_context(|| format!("{}", run.source.display()))?;
        report.config = Some(run.label.clone());
        rows.push((run.label.clone(), report));
        all_verdicts.push(verdicts);
    }
    print!("{}", render_table(&rows));
    if let Some(out) = &args.out {
        crate::create_out_dir(out)?;
        let scored: Vec<ScoredRun> = runs
            .iter()
            .zip(&rows)
            .zip(&all_verdicts)
            .map(|((run, (_, report)), verdicts)| ScoredRun {
                source: run.source.display().to_string(),
                report,
                verdicts,
            })
            .collect();
        let path = out.join("score.json");
        let mut text = serde_json::to_string_pretty(&scored)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}
