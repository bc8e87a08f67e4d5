//! Agentic reasoning runtime and evaluation harness.
//!
//! One shared chat backend is presented to a planner and three tool agents
//! (web search, sandboxed coding, mind-map memory) through role prompts. The
//! [`controller`] runs the plan-act loop under a tool-call budget and a
//! per-role thinking policy and records a [`types::Trace`]; [`eval`] scores
//! traces against GAIA-style gold answers and [`telemetry`] summarises and
//! labels them.

pub mod clock;
pub mod coding;
pub mod controller;
pub mod eval;
pub mod gateway;
pub mod mindmap;
pub mod parser;
pub mod prompts;
pub mod rundir;
pub mod runner;
pub mod search;
pub mod session;
pub mod telemetry;
pub mod text;
pub mod types;

pub use controller::{Controller, ControllerError, TaskOutcome, ToolSuite};
pub use gateway::{ChatBackend, ChatRequest, ChatResponse, Gateway, GatewayError, GatewayPolicy};
pub use types::*;

impl GatewayPolicy {
    /// Gateway settings taken from a run configuration.
    pub fn from_config(config: &RunConfig) -> Self {
        GatewayPolicy {
            per_call_timeout: config.per_call_timeout,
            retries: config.retries_per_tool,
            thinking_off_suffix: config.decoding.thinking_off_suffix.clone(),
        }
    }
}
