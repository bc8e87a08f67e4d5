mod common;

use std::collections::HashMap;
use std::sync::Arc;

use common::{final_answer, frozen_controller, mini_tasks, offline_config};
use toolthink::gateway::{Script, ScriptStep, ScriptedBackend};
use toolthink::runner::{build_backend, clock_for, run_tasks};
use toolthink::{BackendSpec, Gateway, GatewayError, GatewayPolicy, ThinkingPolicy};

/// Earlier tasks answer slowest, so completion order is the reverse of
/// task order; results must still come back in task order.
#[tokio::test]
async fn results_follow_task_order() {
    let tasks = mini_tasks();
    let n = tasks.len() as u64;
    let scripts: HashMap<String, Script> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut step = ScriptStep::reply(final_answer(&t.id));
            step.latency_ms = Some((n - i as u64) * 5);
            (t.id.clone(), Script::new(vec![step]))
        })
        .collect();
    let config = offline_config(ThinkingPolicy::None, false);
    let gateway = Gateway::new(Arc::new(ScriptedBackend::per_task(scripts)), GatewayPolicy::from_config(&config));
    let results = run_tasks(&frozen_controller(), &tasks, &config, &gateway, None, 4).await;
    let predicted: Vec<String> = results.into_iter().map(|r| r.unwrap().trace.predicted_answer).collect();
    let ids: Vec<String> = tasks.iter().map(|t| t.id.clone()).collect();
    assert_eq!(predicted, ids);
}

#[test]
fn scripted_specs_build_and_freeze_time() {
    let dir = BackendSpec::Scripted { path: "tests/fixtures/golden/towers/script".into() };
    assert!(build_backend(&dir).unwrap().scripted.is_some());
    let file = BackendSpec::Scripted { path: "tests/fixtures/golden/towers/script/mini-towers.json".into() };
    assert!(build_backend(&file).is_ok());
    assert!(build_backend(&BackendSpec::Scripted { path: "tests/fixtures/none".into() }).is_err());
    assert_eq!(clock_for(&dir).now(), std::time::Duration::ZERO);
}

#[test]
fn missing_api_key_is_a_precondition_error() {
    let spec = BackendSpec::Http {
        url: "http://127.0.0.1:9/v1".into(),
        model: "m".into(),
        api_key_env: Some("TOOLTHINK_TEST_UNSET_KEY".into()),
    };
    assert!(matches!(build_backend(&spec), Err(GatewayError::Precondition(_))));
    let open = BackendSpec::Http { url: "http://127.0.0.1:9/v1".into(), model: "m".into(), api_key_env: None };
    let built = build_backend(&open).unwrap();
    assert!(built.scripted.is_none());
}
