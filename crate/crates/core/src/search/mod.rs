//! Web-search agent: query breakdown, retrieval and grounded synthesis.

mod provider;

use std::fmt::Write as _;
use std::sync::Arc;

use futures::future::join_all;

pub use provider::{provider_from_spec, FixtureProvider, LiveProvider, ProviderError, SearchProvider, SearchResult};

use crate::gateway::{GatewayError, Message};
use crate::session::ModelSession;
use crate::types::{AgentRole, ToolErrorTag};

pub const NO_RESULTS: &str = "NO_RESULTS";
pub const SEARCH_FAILED: &str = "SEARCH_FAILED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub observation: String,
    pub subqueries: Vec<String>,
    pub error: Option<ToolErrorTag>,
}

pub struct WebSearchAgent {
    provider: Arc<dyn SearchProvider>,
    pub max_subqueries: usize,
    pub top_k: usize,
}

impl WebSearchAgent {
    pub fn new(provider: Arc<dyn SearchProvider>, max_subqueries: usize, top_k: usize) -> Self {
        WebSearchAgent { provider, max_subqueries: max_subqueries.max(1), top_k }
    }

    pub fn provider(&self) -> &dyn SearchProvider {
        self.provider.as_ref()
    }

    /// Decompose, retrieve every sub-query concurrently, then synthesize.
    /// At most two model calls per invocation.
    pub async fn invoke(
        &self,
        session: &mut ModelSession<'_>,
        system_prompt: &str,
        query: &str,
        thinking: bool,
    ) -> Result<SearchOutcome, GatewayError> {
        let subqueries = decompose_query(session, system_prompt, query, self.max_subqueries, thinking).await?;
        let retrievals = join_all(subqueries.iter().map(|q| retrieve(self.provider.as_ref(), q, self.top_k))).await;

        let mut results = Vec::with_capacity(subqueries.len());
        let mut first_error = None;
        for outcome in retrievals {
            match outcome {
                Ok(hits) => results.push(hits),
                Err(err) => {
                    tracing::warn!(error = %err, "search retrieval failed");
                    first_error.get_or_insert(err);
                    results.push(Vec::new());
                }
            }
        }

        let error = first_error.as_ref().map(ProviderError::tag);
        let observation = if results.iter().all(Vec::is_empty) {
            match &first_error {
                Some(err) => format!("{SEARCH_FAILED}: {err}"),
                None => NO_RESULTS.to_string(),
            }
        } else {
            synthesize(session, system_prompt, query, &subqueries, &results, thinking).await?
        };
        Ok(SearchOutcome { observation, subqueries, error })
    }
}

/// Asks the model for sub-queries, one per line. Falls back to the query
/// itself when the reply yields none.
pub async fn decompose_query(
    session: &mut ModelSession<'_>,
    system_prompt: &str,
    query: &str,
    max_subqueries: usize,
    thinking: bool,
) -> Result<Vec<String>, GatewayError> {
    let query = query.trim();
    if query.is_empty() {
        return Err(GatewayError::Precondition("search query is empty".into()));
    }
    let request = format!(
        "Plan web searches for the query below. Reply with at most {max_subqueries} search queries, one per line.\n\nQuery: {query}"
    );
    let reply = session.ask(AgentRole::WebSearch, system_prompt, vec![Message::user(request)], thinking).await?;
    let subqueries = parse_subqueries(&reply.content, max_subqueries);
    Ok(if subqueries.is_empty() { vec![query.to_string()] } else { subqueries })
}

pub(crate) fn parse_subqueries(reply: &str, max: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in reply.lines() {
        let mut item = line.trim();
        item = item.trim_start_matches(['-', '*', '•']).trim_start();
        let digits = item.chars().take_while(char::is_ascii_digit).count();
        if digits > 0 && item[digits..].starts_with(['.', ')']) {
            item = item[digits + 1..].trim_start();
        }
        let item = item.trim().trim_matches('"').trim();
        if item.is_empty() || out.iter().any(|q| q == item) {
            continue;
        }
        out.push(item.to_string());
        if out.len() == max {
            break;
        }
    }
    out
}

pub async fn retrieve(provider: &dyn SearchProvider, subquery: &str, top_k: usize) -> Result<Vec<SearchResult>, ProviderError> {
    let mut hits = provider.search(subquery, top_k).await?;
    hits.truncate(top_k);
    Ok(hits)
}

/// One model call that condenses the retrieved snippets into a passage for
/// the planner. Returns [`NO_RESULTS`] without calling the model when every
/// result list is empty.
pub async fn synthesize(
    session: &mut ModelSession<'_>,
    system_prompt: &str,
    query: &str,
    subqueries: &[String],
    results: &[Vec<SearchResult>],
    thinking: bool,
) -> Result<String, GatewayError> {
    if results.iter().all(Vec::is_empty) {
        return Ok(NO_RESULTS.to_string());
    }
    let mut request = format!("Query: {}\n\nSearch results:\n", query.trim());
    for (sub, hits) in subqueries.iter().zip(results) {
        let _ = writeln!(request, "\n## {sub}");
        if hits.is_empty() {
            request.push_str("(no results)\n");
        }
        for hit in hits {
            let _ = writeln!(request, "[{}] {}\n{}\n{}", hit.rank, hit.title, hit.url, hit.snippet);
        }
    }
    request.push_str("\nWrite the passage that answers the query.");
    let reply = session.ask(AgentRole::WebSearch, system_prompt, vec![Message::user(request)], thinking).await?;
    Ok(reply.content.trim().to_string())
}
