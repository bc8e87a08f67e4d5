use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{SearchProviderSpec, ToolErrorTag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
    /// 1-based, unique within one result set.
    pub rank: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("search provider timed out")]
    ProviderTimeout,
    #[error("search provider quota exhausted: {0}")]
    ProviderQuota(String),
    #[error("search provider reply unusable: {0}")]
    ProviderParse(String),
    #[error("search provider unavailable: {0}")]
    Unavailable(String),
}

impl ProviderError {
    pub fn tag(&self) -> ToolErrorTag {
        match self {
            ProviderError::ProviderTimeout => ToolErrorTag::ProviderTimeout,
            ProviderError::ProviderQuota(_) => ToolErrorTag::ProviderQuota,
            ProviderError::ProviderParse(_) | ProviderError::Unavailable(_) => ToolErrorTag::ProviderParse,
        }
    }
}

#[async_trait]
pub trait SearchProvider: Send + Sync {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, ProviderError>;

    fn kind(&self) -> &'static str;
}

/// Builds the provider named by the configuration.
pub fn provider_from_spec(spec: &SearchProviderSpec, timeout: Duration) -> Result<Box<dyn SearchProvider>, ProviderError> {
    match spec {
        SearchProviderSpec::Fixture { dir: None } => Ok(Box::new(FixtureProvider::empty())),
        SearchProviderSpec::Fixture { dir: Some(dir) } => Ok(Box::new(FixtureProvider::load(dir)?)),
        SearchProviderSpec::Live { endpoint, api_key_env } => {
            let key = std::env::var(api_key_env)
                .map_err(|_| ProviderError::Unavailable(format!("environment variable {api_key_env} is not set")))?;
            Ok(Box::new(LiveProvider::new(endpoint, key, timeout)))
        }
    }
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    query: String,
    results: Vec<FixtureEntry>,
}

#[derive(Debug, Deserialize)]
struct FixtureEntry {
    title: String,
    url: String,
    snippet: String,
    #[serde(default)]
    rank: Option<u32>,
}

/// Offline provider backed by a directory of keyed JSON files.
///
/// Each `*.json` file holds `{"query": "<exact key>", "results": [...]}`;
/// entries without an explicit `rank` are ranked by position.
#[derive(Debug, Default, Clone)]
pub struct FixtureProvider {
    entries: HashMap<String, Vec<SearchResult>>,
}

impl FixtureProvider {
    pub fn empty() -> Self {
        FixtureProvider::default()
    }

    pub fn from_entries(entries: HashMap<String, Vec<SearchResult>>) -> Self {
        FixtureProvider { entries }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let dir = dir.as_ref();
        let read_dir = std::fs::read_dir(dir)
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = read_dir
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
            .collect();
        paths.sort();
        let mut entries = HashMap::new();
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", path.display())))?;
            let file: FixtureFile = serde_json::from_str(&text)
                .map_err(|e| ProviderError::ProviderParse(format!("{}: {e}", path.display())))?;
            let results = rank_entries(file.results)
                .map_err(|e| ProviderError::ProviderParse(format!("{}: {e}", path.display())))?;
            if entries.insert(file.query.clone(), results).is_some() {
                return Err(ProviderError::ProviderParse(format!("duplicate fixture key {:?}", file.query)));
            }
        }
        Ok(FixtureProvider { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn rank_entries(entries: Vec<FixtureEntry>) -> Result<Vec<SearchResult>, String> {
    let mut seen = HashSet::new();
    let mut results = Vec::with_capacity(entries.len());
    for (i, e) in entries.into_iter().enumerate() {
        let rank = e.rank.unwrap_or(i as u32 + 1);
        if rank == 0 || !seen.insert(rank) {
            return Err(format!("rank {rank} is zero or repeated"));
        }
        results.push(SearchResult { title: e.title, url: e.url, snippet: e.snippet, rank });
    }
    results.sort_by_key(|r| r.rank);
    Ok(results)
}

#[async_trait]
impl SearchProvider for FixtureProvider {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, ProviderError> {
        Ok(self.entries.get(query).map(|r| r.iter().take(top_k).cloned().collect()).unwrap_or_default())
    }

    fn kind(&self) -> &'static str {
        "fixture"
    }
}

/// One HTTPS search API speaking the Brave web-search response layout:
/// `GET <endpoint>?q=<query>&count=<k>` with an `X-Subscription-Token`
/// header, answering `{"web": {"results": [{title, url, description}]}}`.
pub struct LiveProvider {
    client: reqwest::Client,
    endpoint: String,
    api_key: String,
    timeout: Duration,
}

#[derive(Deserialize)]
struct LiveBody {
    #[serde(default)]
    web: Option<LiveWeb>,
}

#[derive(Deserialize)]
struct LiveWeb {
    #[serde(default)]
    results: Vec<LiveHit>,
}

#[derive(Deserialize)]
struct LiveHit {
    #[serde(default)]
    title: String,
    #[serde(default)]
    url: String,
    #[serde(default, alias = "snippet")]
    description: String,
}

impl LiveProvider {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        LiveProvider { client: reqwest::Client::new(), endpoint: endpoint.into(), api_key: api_key.into(), timeout }
    }
}

#[async_trait]
impl SearchProvider for LiveProvider {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, ProviderError> {
        let count = top_k.to_string();
        let response = self
            .client
            .get(&self.endpoint)
            .query(&[("q", query), ("count", count.as_str())])
            .header("Accept", "application/json")
            .header("X-Subscription-Token", &self.api_key)
            .timeout(self.timeout)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::ProviderTimeout
                } else {
                    ProviderError::Unavailable(e.to_string())
                }
            })?;
        let status = response.status();
        if status.as_u16() == 429 || status.as_u16() == 402 {
            return Err(ProviderError::ProviderQuota(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Unavailable(format!("HTTP {status}")));
        }
        let body: LiveBody = response.json().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::ProviderTimeout
            } else {
                ProviderError::ProviderParse(e.to_string())
            }
        })?;
        Ok(body
            .web
            .map(|w| w.results)
            .unwrap_or_default()
            .into_iter()
            .take(top_k)
            .enumerate()
            .map(|(i, hit)| SearchResult { title: hit.title, url: hit.url, snippet: hit.description, rank: i as u32 + 1 })
            .collect())
    }

    fn kind(&self) -> &'static str {
        "live"
    }
}
