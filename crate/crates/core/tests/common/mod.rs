//! Shared helpers for the integration tests. Paths are relative to the
//! package root, which is the working directory cargo gives test binaries.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use toolthink::clock::FrozenClock;
use toolthink::eval::load_dataset;
use toolthink::gateway::{ChatRequest, Script, ScriptStep, ScriptedBackend};
use toolthink::prompts::PromptSet;
use toolthink::runner::build_backend;
use toolthink::{
    BackendSpec, Controller, Gateway, GatewayPolicy, RunConfig, SearchProviderSpec, Task, ThinkingPolicy, ToolSuite,
    Trace,
};

pub const MINI_DATASET: &str = "data/mini_validation.jsonl";
pub const GOLDEN_DIR: &str = "tests/fixtures/golden";
pub const GOLDEN_CASES: [&str; 5] = ["towers", "asean", "esther", "olympics", "whitney"];

pub fn mini_tasks() -> Vec<Task> {
    load_dataset(MINI_DATASET).expect("bundled mini dataset loads")
}

pub fn mini_task(id: &str) -> Task {
    mini_tasks().into_iter().find(|t| t.id == id).unwrap_or_else(|| panic!("no task {id}"))
}

#[derive(Debug, Deserialize)]
pub struct GoldenCase {
    pub task_id: String,
    pub thinking: ThinkingPolicy,
    pub tools: bool,
    pub expect: Expectation,
}

#[derive(Debug, Deserialize)]
pub struct Expectation {
    pub web_search: usize,
    pub code: usize,
    pub mind_map: usize,
    pub predicted: String,
    pub terminated_by: String,
    pub label: String,
}

pub fn golden_case_dir(name: &str) -> PathBuf {
    Path::new(GOLDEN_DIR).join(name)
}

pub fn golden_case(name: &str) -> GoldenCase {
    let text = std::fs::read_to_string(golden_case_dir(name).join("case.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn golden_config(name: &str, case: &GoldenCase) -> RunConfig {
    let dir = golden_case_dir(name);
    let search_dir = dir.join("search");
    let mut config = RunConfig {
        backend: BackendSpec::Scripted { path: dir.join("script") },
        tools_enabled: case.tools,
        thinking: case.thinking,
        ..RunConfig::default()
    };
    config.search.provider = SearchProviderSpec::Fixture { dir: search_dir.is_dir().then_some(search_dir) };
    config
}

pub struct GoldenRun {
    pub trace: Trace,
    pub requests: Vec<ChatRequest>,
}

pub async fn run_golden(name: &str) -> GoldenRun {
    let case = golden_case(name);
    let config = golden_config(name, &case);
    let built = build_backend(&config.backend).expect("script loads");
    let gateway = Gateway::new(built.backend, GatewayPolicy::from_config(&config));
    let tools = ToolSuite::from_config(&config, false).expect("fixture provider builds");
    let controller = Controller::new(PromptSet::embedded(), Arc::new(FrozenClock));
    let task = mini_task(&case.task_id);
    let outcome = controller.run_task(&task, &config, &gateway, Some(&tools)).await.expect("controller accepts config");
    GoldenRun { trace: outcome.trace, requests: built.scripted.unwrap().requests() }
}

/// A gateway over an in-memory script shared by every task.
pub fn scripted_gateway(steps: Vec<ScriptStep>, config: &RunConfig) -> (Gateway, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::new(Script::new(steps)));
    (Gateway::new(backend.clone(), GatewayPolicy::from_config(config)), backend)
}

pub fn frozen_controller() -> Controller {
    Controller::new(PromptSet::embedded(), Arc::new(FrozenClock))
}

/// Config with a scripted placeholder backend and offline search.
pub fn offline_config(thinking: ThinkingPolicy, tools: bool) -> RunConfig {
    RunConfig {
        backend: BackendSpec::Scripted { path: PathBuf::from("inline") },
        tools_enabled: tools,
        thinking,
        ..RunConfig::default()
    }
}

pub fn offline_tools(config: &RunConfig) -> ToolSuite {
    ToolSuite::from_config(config, false).expect("offline provider builds")
}

/// Bytes of the trace file the run directory would hold.
pub fn trace_file_bytes(trace: &Trace) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = toolthink::rundir::write_trace(dir.path(), trace).unwrap();
    std::fs::read(path).unwrap()
}

/// Replays one golden case twice and checks its control-flow signature,
/// its label, byte stability, and the committed transcript. With
/// `UPDATE_GOLDEN=1` the committed transcript is rewritten instead.
pub async fn check_golden(name: &str) -> Result<(), String> {
    use toolthink::telemetry::{classify_trace, Thresholds};
    use toolthink::AgentRole;

    let case = golden_case(name);
    let first = run_golden(name).await.trace;
    let second = run_golden(name).await.trace;
    first.check_invariants().map_err(|e| format!("{name}: {e}"))?;

    let counts = (first.calls_to(AgentRole::WebSearch), first.calls_to(AgentRole::Coder), first.calls_to(AgentRole::MindMap));
    let want = (case.expect.web_search, case.expect.code, case.expect.mind_map);
    if counts != want {
        return Err(format!("{name}: tool counts {counts:?}, expected {want:?}"));
    }
    if first.predicted_answer != case.expect.predicted {
        return Err(format!("{name}: predicted {:?}, expected {:?}", first.predicted_answer, case.expect.predicted));
    }
    let terminated = serde_json::to_value(first.terminated_by).unwrap();
    if terminated != case.expect.terminated_by.as_str() {
        return Err(format!("{name}: terminated by {terminated}, expected {}", case.expect.terminated_by));
    }
    let label = classify_trace(&first, &mini_task(&case.task_id), &Thresholds::default());
    if format!("{:?}", label.kind) != case.expect.label {
        return Err(format!("{name}: label {:?}, expected {}", label.kind, case.expect.label));
    }

    let bytes = trace_file_bytes(&first);
    if bytes != trace_file_bytes(&second) {
        return Err(format!("{name}: trace file differs between two runs"));
    }
    let committed = golden_case_dir(name).join("expected_trace.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&committed, &bytes).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read(&committed).map_err(|e| format!("{}: {e}", committed.display()))?;
    if expected != bytes {
        return Err(format!("{name}: trace differs from {}", committed.display()));
    }
    Ok(())
}

/// A planner reply invoking `tool` with one argument.
pub fn tool_call(tool: &str, argument: &str) -> String {
    let key = if tool == "code" { "task" } else { "query" };
    let payload = serde_json::json!({ "name": tool, "arguments": { key: argument } });
    format!("<tool_call>{payload}</tool_call>")
}

pub fn final_answer(text: &str) -> String {
    format!("FINAL ANSWER: {text}")
}

/// Runs a task that touches every role once (search, code, mind map) under
/// `policy` and returns the recorded requests.
pub async fn all_roles_requests(policy: ThinkingPolicy) -> Vec<ChatRequest> {
    let config = offline_config(policy, true);
    let steps = vec![
        ScriptStep::reply(tool_call("web_search", "Eliud Kipchoge marathon record pace")),
        ScriptStep::reply("Kipchoge marathon record time\nKipchoge pace km per hour"),
        ScriptStep::reply(tool_call("code", "Print 363104 / 20.92 / 1000 rounded to an integer.")),
        ScriptStep::reply("```python\nprint(round(363104 / 20.92 / 1000))\n```"),
        ScriptStep::reply(tool_call("mind_map", "thousand hours to the Moon")),
        ScriptStep::reply("Moon trip\tthousand_hours\t17"),
        ScriptStep::reply(final_answer("17")),
    ];
    let (gateway, backend) = scripted_gateway(steps, &config);
    let tools = offline_tools(&config);
    let outcome = frozen_controller()
        .run_task(&mini_task("mini-kipchoge"), &config, &gateway, Some(&tools))
        .await
        .unwrap();
    assert_eq!(outcome.trace.predicted_answer, "17");
    backend.requests()
}

/// Requests whose thinking flag disagrees with `policy`.
pub fn gating_violations(policy: ThinkingPolicy, requests: &[ChatRequest]) -> usize {
    requests.iter().filter(|r| r.thinking_enabled != policy.thinks(r.role)).count()
}

pub mod probes {
    use std::time::{Duration, Instant};

    use toolthink::coding::{execute, SandboxOutcome};
    use toolthink::SandboxLimits;

    pub fn limits(wall: Duration, memory_bytes: u64) -> SandboxLimits {
        SandboxLimits { wall_time: wall, memory_bytes, ..SandboxLimits::default() }
    }

    pub async fn timed(source: &str, limits: &SandboxLimits) -> (SandboxOutcome, Duration) {
        let started = Instant::now();
        let outcome = execute(source, limits).await.expect("interpreter spawns");
        (outcome, started.elapsed())
    }

    pub const BUSY_LOOP: &str = "while True:\n    pass\n";

    pub const SLEEPER: &str = "import time\ntime.sleep(60)\n";

    /// Grows a list in 16 MiB steps, printing the running total in MiB.
    pub const ALLOCATOR: &str = "import sys\nheld = []\nwhile True:\n    held.append(bytearray(16 << 20))\n    print(len(held) * 16, flush=True)\n";

    /// Writes outside the working directory; `{path}` is substituted.
    pub fn escape_writer(path: &str) -> String {
        format!("with open({path:?}, 'w') as f:\n    f.write('escaped')\nprint('wrote')\n")
    }

    pub const CONNECTOR: &str =
        "import socket\ns = socket.create_connection(('1.1.1.1', 53), timeout=3)\nprint('connected')\n";
}

pub mod instrumented {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::time::Duration;

    use async_trait::async_trait;
    use toolthink::gateway::{ChatBackend, ChatRequest, ChatResponse, GatewayError, Message, TokenUsage};
    use toolthink::{AgentRole, Gateway, GatewayPolicy};

    /// Counts concurrent `execute` calls and remembers the peak.
    #[derive(Default)]
    pub struct CountingBackend {
        pub in_flight: AtomicUsize,
        pub peak: AtomicUsize,
        pub calls: AtomicUsize,
        pub delay: Duration,
    }

    #[async_trait]
    impl ChatBackend for CountingBackend {
        async fn execute(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.delay.is_zero() {
                tokio::task::yield_now().await;
            } else {
                tokio::time::sleep(self.delay).await;
            }
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            Ok(ChatResponse {
                content: format!("echo {}", request.task_id),
                thinking_segment: None,
                token_usage: TokenUsage::default(),
                latency: self.delay,
            })
        }
    }

    pub fn request(task_id: &str, thinking: bool) -> ChatRequest {
        ChatRequest {
            role: AgentRole::Planner,
            task_id: task_id.to_string(),
            system_prompt: "You are the planner.".to_string(),
            messages: vec![Message::user("Question: ?")],
            thinking_enabled: thinking,
            max_output_tokens: 64,
            temperature: 0.0,
            seed: 0,
        }
    }

    /// Peak concurrency and total calls seen by the backend when `tasks`
    /// concurrent tasks each issue `calls_per_task` completions.
    pub async fn exclusivity_probe(tasks: usize, calls_per_task: usize) -> (usize, usize) {
        let backend = Arc::new(CountingBackend::default());
        let gateway = Arc::new(Gateway::new(backend.clone(), GatewayPolicy::default()));
        let mut handles = Vec::new();
        for t in 0..tasks {
            let gateway = gateway.clone();
            handles.push(tokio::spawn(async move {
                for _ in 0..calls_per_task {
                    gateway.complete(request(&format!("task-{t}"), false)).await.unwrap();
                }
            }));
        }
        for h in handles {
            h.await.unwrap();
        }
        (backend.peak.load(Ordering::SeqCst), backend.calls.load(Ordering::SeqCst))
    }
}

/// Reference implementations written independently of the library, used as
/// test oracles.
pub mod oracle {
    use proptest::prelude::*;

    /// Published accuracy rows as printed: label, then ACC, L1, L2, L3.
    pub const REFERENCE_ROWS: [(&str, [&str; 4]); 25] = [
        ("4B-Instruct No-Tools NO", ["9.70", "20.75", "5.81", "0.00"]),
        ("4B-Instruct No-Tools YES", ["10.91", "18.87", "9.30", "0.00"]),
        ("4B-Instruct Agentic NO", ["16.36", "30.19", "12.79", "0.00"]),
        ("4B-Instruct Agentic PLANNER", ["18.18", "30.19", "15.12", "3.85"]),
        ("4B-Instruct Agentic YES", ["15.76", "26.42", "13.95", "0.00"]),
        ("4B No-Tools NO", ["6.06", "9.43", "4.65", "3.85"]),
        ("4B No-Tools YES", ["9.09", "15.09", "8.14", "0.00"]),
        ("4B Agentic NO", ["13.33", "15.09", "16.28", "0.00"]),
        ("4B Agentic PLANNER", ["10.91", "20.75", "6.98", "3.85"]),
        ("4B Agentic YES", ["9.09", "20.75", "3.49", "3.85"]),
        ("8B No-Tools NO", ["6.06", "11.32", "4.65", "0.00"]),
        ("8B No-Tools YES", ["6.06", "9.43", "5.81", "0.00"]),
        ("8B Agentic NO", ["10.30", "18.87", "6.98", "3.85"]),
        ("8B Agentic PLANNER", ["12.73", "22.64", "10.47", "0.00"]),
        ("8B Agentic YES", ["16.36", "30.19", "11.63", "3.85"]),
        ("14B No-Tools NO", ["7.27", "15.09", "2.33", "7.69"]),
        ("14B No-Tools YES", ["9.09", "16.98", "6.98", "0.00"]),
        ("14B Agentic NO", ["17.58", "24.53", "18.60", "0.00"]),
        ("14B Agentic PLANNER", ["19.39", "35.85", "12.79", "7.69"]),
        ("14B Agentic YES", ["20.61", "37.74", "16.28", "0.00"]),
        ("32B No-Tools NO", ["9.70", "16.98", "6.98", "3.85"]),
        ("32B No-Tools YES", ["12.73", "20.75", "9.30", "7.69"]),
        ("32B Agentic NO", ["25.45", "35.85", "23.26", "11.54"]),
        ("32B Agentic PLANNER", ["20.61", "33.96", "15.12", "11.54"]),
        ("32B Agentic YES", ["23.03", "33.96", "22.09", "3.85"]),
    ];

    pub const DENOMINATORS: [u64; 4] = [165, 53, 86, 26];

    /// Parses "25.45" into hundredths.
    pub fn hundredths(text: &str) -> u64 {
        let (whole, frac) = text.split_once('.').unwrap();
        whole.parse::<u64>().unwrap() * 100 + frac.parse::<u64>().unwrap()
    }

    /// `100 * c / n` to two decimals, half-up, by long division.
    pub fn percent_hundredths(c: u64, n: u64) -> u64 {
        let scaled = c * 10_000;
        let (q, r) = (scaled / n, scaled % n);
        if 2 * r >= n {
            q + 1
        } else {
            q
        }
    }

    /// Every `(c1, c2, c3)` whose per-level and overall percentages print as
    /// the given row.
    pub fn solve_row(row: &[&str; 4]) -> Vec<[u64; 3]> {
        let want: Vec<u64> = row.iter().map(|s| hundredths(s)).collect();
        let mut found = Vec::new();
        for c1 in 0..=DENOMINATORS[1] {
            if percent_hundredths(c1, DENOMINATORS[1]) != want[1] {
                continue;
            }
            for c2 in 0..=DENOMINATORS[2] {
                if percent_hundredths(c2, DENOMINATORS[2]) != want[2] {
                    continue;
                }
                for c3 in 0..=DENOMINATORS[3] {
                    if percent_hundredths(c3, DENOMINATORS[3]) == want[3]
                        && percent_hundredths(c1 + c2 + c3, DENOMINATORS[0]) == want[0]
                    {
                        found.push([c1, c2, c3]);
                    }
                }
            }
        }
        found
    }

    /// Exact decimal value as (numerator, power of ten in the denominator).
    fn decimal(text: &str) -> Option<(i128, u32)> {
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
        if whole.is_empty() && frac.is_empty() {
            return None;
        }
        if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{whole}{frac}");
        let mut value: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let mut scale = frac.len() as u32;
        while scale > 0 && value % 10 == 0 {
            value /= 10;
            scale -= 1;
        }
        Some((if neg { -value } else { value }, scale))
    }

    fn numeric(text: &str) -> Option<(i128, u32)> {
        let kept: String = text.chars().filter(|c| !",$€£¥".contains(*c)).collect();
        let kept = kept.trim();
        decimal(kept.strip_suffix('%').unwrap_or(kept).trim())
    }

    fn drop_article(text: &str) -> &str {
        for article in ["a ", "an ", "the "] {
            if let Some(rest) = text.strip_prefix(article) {
                return rest;
            }
        }
        text
    }

    fn unquote(text: &str) -> &str {
        for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’')] {
            if text.chars().count() >= 2 && text.starts_with(open) && text.ends_with(close) {
                return &text[open.len_utf8()..text.len() - close.len_utf8()];
            }
        }
        text
    }

    /// Quasi-exact match, written from the rules rather than the library.
    pub fn matches(predicted: &str, gold: &str) -> bool {
        let p = predicted.trim().to_lowercase();
        let g = gold.trim().to_lowercase();
        if let (Some(a), Some(b)) = (numeric(&p), numeric(&g)) {
            return a == b;
        }
        if g.contains(',') {
            let items = |s: &str| -> Vec<String> { s.split(',').map(|i| drop_article(i.trim()).trim().to_string()).collect() };
            return items(&p) == items(&g);
        }
        let words = |s: &str| -> String { unquote(s).split_whitespace().collect::<Vec<_>>().join(" ") };
        drop_article(&words(&p)) == drop_article(&words(&g))
    }

    /// A generated scoring case with its answer known by construction.
    #[derive(Debug, Clone)]
    pub struct ScoreCase {
        pub predicted: String,
        pub gold: String,
        pub expected: bool,
    }

    const WORDS: [&str; 12] =
        ["indonesia", "myanmar", "guava", "wojciech", "legion", "morarji", "desai", "pineapple", "cuba", "moon", "tower", "river"];

    fn with_separators(digits: &str) -> String {
        let mut out = String::new();
        for (i, c) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                out.push(',');
            }
            out.push(c);
        }
        out
    }

    fn render_number(cents: u64, decimals: bool, separators: bool) -> String {
        let whole = (cents / 100).to_string();
        let whole = if separators { with_separators(&whole) } else { whole };
        if decimals {
            format!("{whole}.{:02}", cents % 100)
        } else {
            whole
        }
    }

    fn number_case() -> impl Strategy<Value = ScoreCase> {
        (0u64..100_000_000, any::<bool>(), 0usize..6, any::<bool>(), 1u64..1000).prop_map(
            |(raw, decimals, dress, equal, delta)| {
                let cents = if decimals { raw } else { raw / 100 * 100 };
                let gold = render_number(cents, decimals, false);
                let value = if equal { cents } else if decimals { cents + delta } else { cents + delta * 100 };
                let body = render_number(value, decimals, dress % 2 == 1);
                let predicted = match dress {
                    0 | 1 => body,
                    2 => format!("${body}"),
                    3 => format!("{body}%"),
                    4 => format!("  €{body} "),
                    _ if decimals => format!("{body}0"),
                    _ => format!("{body}.0"),
                };
                ScoreCase { predicted, gold, expected: equal }
            },
        )
    }

    fn dress_word(word: &str, style: usize) -> String {
        match style % 4 {
            0 => word.to_string(),
            1 => word.to_uppercase(),
            2 => format!("the {word}"),
            _ => {
                let mut c = word.chars();
                let first = c.next().unwrap().to_uppercase().collect::<String>();
                format!("{first}{}", c.as_str())
            }
        }
    }

    fn list_case() -> impl Strategy<Value = ScoreCase> {
        (proptest::sample::subsequence(WORDS.to_vec(), 2..5), proptest::collection::vec(0usize..8, 5), 0usize..4)
            .prop_map(|(items, styles, mutation)| {
                let gold = items.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
                let mut pred: Vec<String> = items.iter().map(|s| s.to_string()).collect();
                let expected = match mutation {
                    0 => true,
                    1 => {
                        pred.swap(0, 1);
                        false
                    }
                    2 => {
                        pred.pop();
                        false
                    }
                    _ => {
                        let replacement = WORDS.iter().find(|w| !items.contains(w)).unwrap();
                        pred[0] = replacement.to_string();
                        false
                    }
                };
                let dressed: Vec<String> = pred.iter().zip(&styles).map(|(w, &s)| dress_word(w, s)).collect();
                let joiner = if styles[4] % 2 == 0 { ", " } else { " ,  " };
                ScoreCase { predicted: dressed.join(joiner), gold, expected }
            })
    }

    fn text_case() -> impl Strategy<Value = ScoreCase> {
        (proptest::sample::subsequence(WORDS.to_vec(), 1..4), 0usize..5, 0usize..3).prop_map(|(words, dress, mutation)| {
            let gold = words.join(" ");
            let mut pred: Vec<String> = words.iter().map(|s| s.to_string()).collect();
            let expected = match mutation {
                0 => true,
                1 => {
                    let other = WORDS.iter().find(|w| !words.contains(w)).unwrap();
                    pred.push(other.to_string());
                    false
                }
                _ => {
                    let last = pred.len() - 1;
                    pred[last].push('s');
                    false
                }
            };
            let body = pred.join(" ");
            let predicted = match dress {
                0 => body,
                1 => body.to_uppercase(),
                2 => format!("\"{}\"", pred.join("   ")),
                3 => format!("The {body}"),
                _ => format!("  '{body}'\t"),
            };
            ScoreCase { predicted, gold, expected }
        })
    }

    pub fn score_case() -> impl Strategy<Value = ScoreCase> {
        prop_oneof![number_case(), list_case(), text_case()]
    }
}

/// A hand-built trace with the given tool calls.
pub fn synthetic_trace(
    task_id: &str,
    calls: &[(toolthink::AgentRole, &str)],
    predicted: &str,
    terminated_by: toolthink::Termination,
) -> Trace {
    use std::time::Duration;
    use toolthink::{ToolCallRecord, Termination, TOOL_CALL_PLACEHOLDER};

    let tool_calls = calls
        .iter()
        .enumerate()
        .map(|(i, (tool, args))| ToolCallRecord {
            index: i as u32 + 1,
            tool: *tool,
            arguments: args.to_string(),
            observation: "observed".to_string(),
            wall_time: Duration::ZERO,
            error: None,
        })
        .collect();
    let final_answer = if terminated_by == Termination::FinalAnswer { predicted.to_string() } else { String::new() };
    let predicted_answer = match terminated_by {
        Termination::BudgetExhausted => TOOL_CALL_PLACEHOLDER.to_string(),
        _ => predicted.to_string(),
    };
    Trace {
        task_id: task_id.to_string(),
        config_snapshot: RunConfig::default(),
        turns: Vec::new(),
        tool_calls,
        final_answer,
        terminated_by,
        predicted_answer,
        malformed_turns: 0,
    }
}

/// Traces for mini tasks whose combined search/code/mind-map counts are
/// exactly `counts`, spread round-robin over the tasks.
pub fn traces_with_counts(tasks: &[Task], counts: [usize; 3]) -> Vec<Trace> {
    use toolthink::{AgentRole, Termination};
    let mut per_task: Vec<Vec<(AgentRole, &str)>> = vec![Vec::new(); tasks.len()];
    let mut slot = 0;
    for (tool, n) in AgentRole::TOOLS.into_iter().zip(counts) {
        for _ in 0..n {
            per_task[slot % tasks.len()].push((tool, "q"));
            slot += 1;
        }
    }
    tasks.iter().zip(per_task).map(|(t, calls)| synthetic_trace(&t.id, &calls, "x", Termination::FinalAnswer)).collect()
}

/// `100 * part / whole` to one decimal, half-up, as tenths.
pub fn share_tenths(part: usize, whole: usize) -> u64 {
    let (p, w) = (part as u64 * 1000, whole as u64);
    (2 * p + w) / (2 * w)
}

pub const MAGDA_QUERIES: [&str; 7] = [
    "actor who played Ray in the Polish version of Everybody Loves Raymond",
    "Richard Lewis played Magda M.",
    "who played Magda M in a play",
    "Magda M actor",
    "Ray Barone Polish version actor",
    "Everybody Loves Raymond Polish cast",
    "Richard Lewis Magda M role",
];

pub mod pairs {
    use toolthink::eval::{judge, Verdict};
    use toolthink::telemetry::{classify_pair, PairedFinding, Thresholds};
    use toolthink::{AgentRole, Task, Termination, Trace};

    use super::{mini_task, synthetic_trace};

    pub struct Pair {
        pub task: Task,
        pub nt: Trace,
        pub t: Trace,
    }

    impl Pair {
        pub fn verdicts(&self) -> (Verdict, Verdict) {
            (judge(&self.task, &self.nt.predicted_answer), judge(&self.task, &self.t.predicted_answer))
        }

        pub fn classify(&self) -> PairedFinding {
            let (nv, tv) = self.verdicts();
            classify_pair(&self.nt, &self.t, &self.task, &nv, &tv, &Thresholds::default()).unwrap()
        }
    }

    /// No-thinking codes the answer; thinking skips the coder and guesses.
    pub fn towers() -> Pair {
        let code = [(AgentRole::Coder, "count towers for houses at [2, 6, 11, 15, 20] with 4-mile radius")];
        Pair {
            task: mini_task("mini-towers"),
            nt: synthetic_trace("mini-towers", &code, "3", Termination::FinalAnswer),
            t: synthetic_trace("mini-towers", &[], "2", Termination::FinalAnswer),
        }
    }

    /// Same tools; no-thinking reports hours instead of thousands of hours.
    pub fn kipchoge() -> Pair {
        let calls = [(AgentRole::WebSearch, "Kipchoge marathon record pace"), (AgentRole::Coder, "363104 km at 20.92 km/h")];
        Pair {
            task: mini_task("mini-kipchoge"),
            nt: synthetic_trace("mini-kipchoge", &calls, "17000", Termination::FinalAnswer),
            t: synthetic_trace("mini-kipchoge", &calls, "17", Termination::FinalAnswer),
        }
    }

    /// No tools on either side; only the thinking run follows the format.
    pub fn guava() -> Pair {
        Pair {
            task: mini_task("mini-guava"),
            nt: synthetic_trace("mini-guava", &[], "Pineapple", Termination::FinalAnswer),
            t: synthetic_trace("mini-guava", &[], "Guava", Termination::FinalAnswer),
        }
    }
}
