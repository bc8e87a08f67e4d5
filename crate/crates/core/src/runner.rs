//! Wiring for whole runs: backend construction and concurrent task
//! execution through one shared gateway.

use std::sync::Arc;

use futures::stream::{self, Stream, StreamExt};

use crate::clock::{Clock, FrozenClock, SystemClock};
use crate::controller::{Controller, ControllerError, TaskOutcome, ToolSuite};
use crate::gateway::{load_script, load_script_dir, ChatBackend, Gateway, GatewayError, HttpBackend, ScriptedBackend};
use crate::types::{BackendSpec, RunConfig, Task};

/// A backend ready for the gateway, plus the scripted handle when replaying
/// (so callers can inspect the request log).
pub struct BuiltBackend {
    pub backend: Arc<dyn ChatBackend>,
    pub scripted: Option<Arc<ScriptedBackend>>,
}

pub fn build_backend(spec: &BackendSpec) -> Result<BuiltBackend, GatewayError> {
    match spec {
        BackendSpec::Scripted { path } => {
            let scripted = Arc::new(if path.is_dir() { load_script_dir(path)? } else { load_script(path)? });
            Ok(BuiltBackend { backend: scripted.clone(), scripted: Some(scripted) })
        }
        BackendSpec::Http { url, model, api_key_env } => {
            let key = match api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    GatewayError::Precondition(format!("environment variable {var} is not set"))
                })?),
                None => None,
            };
            Ok(BuiltBackend { backend: Arc::new(HttpBackend::new(url, model.clone(), key)), scripted: None })
        }
    }
}

/// Replayed runs use a frozen clock so their traces are byte-stable.
pub fn clock_for(spec: &BackendSpec) -> Arc<dyn Clock> {
    if spec.is_scripted() {
        Arc::new(FrozenClock)
    } else {
        Arc::new(SystemClock::new())
    }
}

/// Runs `tasks` with at most `workers` in flight, yielding outcomes in
/// task order as they become available.
pub fn stream_tasks<'a>(
    controller: &'a Controller,
    tasks: &'a [Task],
    config: &'a RunConfig,
    gateway: &'a Gateway,
    tools: Option<&'a ToolSuite>,
    workers: usize,
) -> impl Stream<Item = (&'a Task, Result<TaskOutcome, ControllerError>)> + 'a {
    stream::iter(tasks)
        .map(move |task| async move { (task, controller.run_task(task, config, gateway, tools).await) })
        .buffered(workers.max(1))
}

pub async fn run_tasks(
    controller: &Controller,
    tasks: &[Task],
    config: &RunConfig,
    gateway: &Gateway,
    tools: Option<&ToolSuite>,
    workers: usize,
) -> Vec<Result<TaskOutcome, ControllerError>> {
    stream_tasks(controller, tasks, config, gateway, tools, workers).map(|(_, r)| r).collect().await
}
