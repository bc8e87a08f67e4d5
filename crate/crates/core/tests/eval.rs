mod common;

use std::collections::BTreeMap;

use common::oracle::{self, ScoreCase};
use proptest::prelude::*;
use toolthink::eval::{
    aggregate, aggregate_counts, compare, judge, level_histogram, parse_dataset, render_table, score_answer, Branch,
    DatasetError, LevelCounts, Percent, ReportError, Verdict,
};
use toolthink::{AnswerShape, Level, Task};

fn level(n: i64) -> Level {
    Level::new(n).unwrap()
}

#[test]
fn mini_dataset_schema() {
    let tasks = common::mini_tasks();
    assert_eq!(tasks.len(), 10);
    assert_eq!(level_histogram(&tasks), BTreeMap::from([(1, 5), (2, 4), (3, 1)]));
    for task in &tasks {
        assert!(!task.id.is_empty() && !task.question.is_empty() && !task.gold_answer.is_empty());
        assert!(task.attachments.is_empty());
        assert!(task.answer_shape.is_some(), "{}", task.id);
    }
    let olympics = tasks.iter().find(|t| t.id == "mini-olympics").unwrap();
    assert_eq!(olympics.answer_shape, Some(AnswerShape::CodeToken(3)));
}

#[test]
fn dataset_errors_carry_line_numbers() {
    let good = r#"{"task_id": "a", "Question": "q", "Level": 1, "Final answer": "x"}"#;
    let missing = r#"{"task_id": "b", "Question": "q", "Final answer": "x"}"#;
    let err = parse_dataset(&format!("{good}\n\n{missing}\n"), None).unwrap_err();
    assert!(matches!(err, DatasetError::MissingField { line: 3, field: "Level" }), "{err}");

    let err = parse_dataset(&format!("{good}\n{{not json\n"), None).unwrap_err();
    assert!(matches!(err, DatasetError::ParseError { line: 2, .. }), "{err}");

    let err = parse_dataset(&format!("{good}\n{good}\n"), None).unwrap_err();
    assert!(matches!(err, DatasetError::DuplicateTask { line: 2, .. }), "{err}");

    let bad_level = r#"{"task_id": "c", "Question": "q", "Level": 4, "Final answer": "x"}"#;
    assert!(matches!(parse_dataset(bad_level, None), Err(DatasetError::ParseError { line: 1, .. })));

    let bad_shape = r#"{"task_id": "c", "Question": "q", "Level": 1, "Final answer": "x", "answer_shape": "roman"}"#;
    assert!(matches!(parse_dataset(bad_shape, None), Err(DatasetError::ParseError { line: 1, .. })));

    assert!(parse_dataset("", None).unwrap().is_empty());
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(toolthink::eval::load_dataset("no/such/file.jsonl"), Err(DatasetError::Io { .. })));
}

#[test]
fn gaia_validation_histogram_when_available() {
    let Some(path) = std::env::var_os("GAIA_VALIDATION_METADATA") else {
        eprintln!("GAIA_VALIDATION_METADATA not set; skipping the full validation split");
        return;
    };
    let tasks = toolthink::eval::load_dataset(path).unwrap();
    assert_eq!(tasks.len(), 165);
    assert_eq!(level_histogram(&tasks), BTreeMap::from([(1, 53), (2, 86), (3, 26)]));
}

#[test]
fn reference_pairs() {
    assert!(score_answer("Indonesia, Myanmar", "Indonesia, Myanmar", None));
    assert!(!score_answer("17000", "17", None));
    assert!(score_answer("17", "17", None));
    let heading = "### Countries with One Athlete at the 1928 Summer Olympics";
    assert!(!score_answer(heading, "CUB", Some(&AnswerShape::CodeToken(3))));
    assert!(score_answer("1,234", "1234", None));
}

#[test]
fn units_are_not_stripped() {
    assert!(!score_answer("17 thousand hours", "17", None));
    assert_eq!(compare("17 thousand hours", "17").branch, Branch::Text);
}

fn check_case(case: &ScoreCase) -> Result<(), TestCaseError> {
    let got = score_answer(&case.predicted, &case.gold, None);
    prop_assert_eq!(oracle::matches(&case.predicted, &case.gold), case.expected, "oracle disagrees: {:?}", case);
    prop_assert_eq!(got, case.expected, "scorer disagrees: {:?}", case);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_cases_match_oracle(case in oracle::score_case()) {
        check_case(&case)?;
    }

    #[test]
    fn scoring_ignores_case_and_outer_whitespace(word in "[a-z]{1,12}", pad in "[ \t]{0,3}") {
        let padded = format!("{pad}{}{pad}", word.to_uppercase());
        prop_assert!(score_answer(&padded, &word, None));
    }

    #[test]
    fn numeric_branch_is_symmetric(a in 0u32..100_000, b in 0u32..100_000) {
        let (x, y) = (a.to_string(), b.to_string());
        prop_assert_eq!(score_answer(&x, &y, None), score_answer(&y, &x, None));
    }
}

fn task(id: &str, lv: i64) -> Task {
    Task {
        id: id.into(),
        question: "q".into(),
        level: level(lv),
        gold_answer: "x".into(),
        answer_shape: None,
        attachments: vec![],
    }
}

fn verdict(id: &str, correct: bool) -> Verdict {
    Verdict {
        task_id: id.into(),
        correct,
        predicted: String::new(),
        gold: String::new(),
        normalized_predicted: String::new(),
        normalized_gold: String::new(),
    }
}

/// 165 tasks split 53/86/26 with the first `correct[i]` of each level right.
pub fn synthetic_run(correct: [usize; 3]) -> (Vec<Task>, Vec<Verdict>) {
    let mut tasks = Vec::new();
    let mut verdicts = Vec::new();
    for (i, n) in [53usize, 86, 26].into_iter().enumerate() {
        for k in 0..n {
            let id = format!("L{}-{k:03}", i + 1);
            tasks.push(task(&id, i as i64 + 1));
            verdicts.push(verdict(&id, k < correct[i]));
        }
    }
    (tasks, verdicts)
}

#[test]
fn aggregate_reproduces_best_row() {
    let (tasks, verdicts) = synthetic_run([19, 20, 3]);
    let report = aggregate(&verdicts, &tasks).unwrap();
    assert_eq!(report.correct_total, 42);
    assert_eq!(report.acc_overall.to_string(), "25.45");
    let per: Vec<String> = report.acc_per_level.values().map(Percent::to_string).collect();
    assert_eq!(per, ["35.85", "23.26", "11.54"]);
    assert!(render_table(&[("agentic/none".into(), report)]).contains("25.45"));
}

#[test]
fn aggregate_zero_and_errors() {
    let (tasks, verdicts) = synthetic_run([0, 0, 0]);
    let report = aggregate(&verdicts, &tasks).unwrap();
    assert_eq!(report.acc_overall, Percent(0));
    assert!(report.acc_per_level.values().all(|p| *p == Percent(0)));

    assert_eq!(aggregate(&[], &tasks), Err(ReportError::EmptyInput));
    assert!(matches!(aggregate(&[verdict("ghost", true)], &tasks), Err(ReportError::UnknownTask(_))));
    let twice = [verdict("L1-000", true), verdict("L1-000", false)];
    assert!(matches!(aggregate(&twice, &tasks), Err(ReportError::DuplicateVerdict(_))));

    let inconsistent = BTreeMap::from([
        (level(1), LevelCounts { correct: 8, total: 53 }),
        (level(2), LevelCounts { correct: 3, total: 86 }),
        (level(3), LevelCounts { correct: 0, total: 26 }),
    ]);
    assert!(matches!(aggregate_counts(9, 165, &inconsistent), Err(ReportError::InconsistentCounts(_))));
}

#[test]
fn every_table_row_has_a_count_solution() {
    for (label, row) in oracle::REFERENCE_ROWS {
        let solutions = oracle::solve_row(&row);
        assert!(!solutions.is_empty(), "{label}");
        for [c1, c2, c3] in solutions {
            let levels = BTreeMap::from([
                (level(1), LevelCounts { correct: c1 as usize, total: 53 }),
                (level(2), LevelCounts { correct: c2 as usize, total: 86 }),
                (level(3), LevelCounts { correct: c3 as usize, total: 26 }),
            ]);
            let report = aggregate_counts((c1 + c2 + c3) as usize, 165, &levels).unwrap();
            let printed: Vec<String> =
                std::iter::once(report.acc_overall).chain(report.acc_per_level.values().copied()).map(|p| p.to_string()).collect();
            assert_eq!(printed, row, "{label}");
        }
    }
}

#[test]
fn judge_fills_normalized_forms() {
    let t = Task { gold_answer: "Indonesia, Myanmar".into(), ..task("mini-asean", 2) };
    let v = judge(&t, "the indonesia ,myanmar");
    assert!(v.correct);
    assert_eq!(v.normalized_gold, "indonesia,myanmar");
    assert_eq!(v.normalized_predicted, v.normalized_gold);
}

proptest! {
    #[test]
    fn aggregate_is_permutation_invariant(seed in any::<u64>(), c1 in 0usize..=53, c2 in 0usize..=86, c3 in 0usize..=26) {
        let (tasks, mut verdicts) = synthetic_run([c1, c2, c3]);
        let before = aggregate(&verdicts, &tasks).unwrap();
        let mut state = seed | 1;
        for i in (1..verdicts.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            verdicts.swap(i, (state % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(aggregate(&verdicts, &tasks).unwrap(), before);
    }
}
