mod common;

use common::{check_golden, run_golden};
use toolthink::{AgentRole, ThinkingPolicy};

#[tokio::test]
async fn towers() {
    check_golden("towers").await.unwrap();
}

#[tokio::test]
async fn asean() {
    check_golden("asean").await.unwrap();
}

#[tokio::test]
async fn esther() {
    check_golden("esther").await.unwrap();
}

#[tokio::test]
async fn olympics() {
    check_golden("olympics").await.unwrap();
}

#[tokio::test]
async fn whitney() {
    check_golden("whitney").await.unwrap();
}

#[tokio::test]
async fn requests_follow_each_case_policy() {
    for name in common::GOLDEN_CASES {
        let case = common::golden_case(name);
        let run = run_golden(name).await;
        assert!(!run.requests.is_empty());
        for request in &run.requests {
            let want = match case.thinking {
                ThinkingPolicy::None => false,
                ThinkingPolicy::PlannerOnly => request.role == AgentRole::Planner,
                ThinkingPolicy::Full => true,
            };
            assert_eq!(request.thinking_enabled, want, "{name}: {:?}", request.role);
        }
    }
}

#[tokio::test]
async fn olympics_keeps_mind_map_facts() {
    let run = run_golden("olympics").await;
    let call = run.trace.tool_calls.iter().find(|c| c.tool == AgentRole::MindMap).expect("mind map call");
    assert!(call.observation.contains(" | "), "{}", call.observation);
    assert!(run.trace.malformed_turns >= 1);
}
