//! Layered run configuration: defaults < TOML file < environment < flags.
//!
//! Flags and their `TOOLTHINK_*` environment twins are merged by clap, which
//! only consults the environment when the flag is absent; this module lays
//! the result over the file.

use std::num::NonZeroU32;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::Value;
use toolthink::{BackendSpec, RunConfig, SearchProviderSpec, ThinkingPolicy};

/// Model name used for `http:` backends when none is configured.
const DEFAULT_MODEL: &str = "default";

/// Settings that may come from the environment or the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub backend: Option<String>,
    pub model: Option<String>,
    pub tools: Option<bool>,
    pub thinking: Option<ThinkingPolicy>,
    pub max_tool_calls: Option<NonZeroU32>,
    pub seed: Option<u64>,
    pub search_fixtures: Option<PathBuf>,
}

pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> anyhow::Result<RunConfig> {
    let mut config = match file {
        Some(path) => load_file(path)?,
        None => RunConfig::default(),
    };
    apply(&mut config, overrides)?;
    Ok(config)
}

/// Reads a TOML config. Relative paths inside it resolve against the
/// file's own directory.
pub fn load_file(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("{} is not valid TOML", path.display()))?;
    let mut value = serde_json::to_value(table)?;
    // `backend = "scripted:<path>"` is accepted as shorthand.
    if let Some(Value::String(spec)) = value.get("backend") {
        let parsed = BackendSpec::parse(spec, DEFAULT_MODEL)
            .with_context(|| format!("{}: backend {spec:?} is neither scripted:<path> nor http:<url>", path.display()))?;
        value["backend"] = serde_json::to_value(parsed)?;
    }
    // The flag labels (`planner`, `full`, ...) are accepted as well.
    if let Some(Value::String(label)) = value.get("thinking") {
        let policy: ThinkingPolicy =
            label.parse().with_context(|| format!("{}: unknown thinking policy {label:?}", path.display()))?;
        value["thinking"] = serde_json::to_value(policy)?;
    }
    let mut config: RunConfig =
        serde_json::from_value(value).with_context(|| format!("{}: invalid configuration", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    if let BackendSpec::Scripted { path: script } = &mut config.backend {
        *script = anchor(base, script);
    }
    if let SearchProviderSpec::Fixture { dir: Some(dir) } = &mut config.search.provider {
        *dir = anchor(base, dir);
    }
    Ok(config)
}

fn anchor(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn apply(config: &mut RunConfig, o: &Overrides) -> anyhow::Result<()> {
    if let Some(spec) = &o.backend {
        let model = match (&o.model, &config.backend) {
            (Some(m), _) => m.clone(),
            (None, BackendSpec::Http { model, .. }) => model.clone(),
            (None, _) => DEFAULT_MODEL.to_string(),
        };
        let Some(parsed) = BackendSpec::parse(spec, &model) else {
            bail!("backend {spec:?} is neither scripted:<path> nor http:<url>");
        };
        // Keep the configured key variable when only the URL changes.
        config.backend = match (parsed, &config.backend) {
            (BackendSpec::Http { url, model, .. }, BackendSpec::Http { api_key_env, .. }) => {
                BackendSpec::Http { url, model, api_key_env: api_key_env.clone() }
            }
            (parsed, _) => parsed,
        };
    } else if let (Some(m), BackendSpec::Http { model, .. }) = (&o.model, &mut config.backend) {
        *model = m.clone();
    }
    if let Some(tools) = o.tools {
        config.tools_enabled = tools;
    }
    if let Some(thinking) = o.thinking {
        config.thinking = thinking;
    }
    if let Some(max) = o.max_tool_calls {
        config.max_tool_calls = max;
    }
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(dir) = &o.search_fixtures {
        config.search.provider = SearchProviderSpec::Fixture { dir: Some(dir.clone()) };
    }
    Ok(())
}
