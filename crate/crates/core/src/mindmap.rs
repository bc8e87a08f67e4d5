//! Mind-map agent: a per-task knowledge graph of findings.
//!
//! Passages are turned into `subject<TAB>relation<TAB>object` triples by one
//! model call. Subjects become entity nodes and objects fact nodes, both
//! deduplicated by case-folded label. Queries rank nodes by how many content
//! tokens their label shares with the question.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gateway::{GatewayError, Message};
use crate::session::ModelSession;
use crate::text::token_set;
use crate::types::{AgentRole, ToolCallRecord};

pub const MINDMAP_EMPTY: &str = "MINDMAP_EMPTY";
pub const DEFAULT_TOP_M: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Entity,
    Fact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub label: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Triples that produced a new edge.
    pub added: Vec<Triple>,
    pub new_nodes: usize,
    /// Non-blank lines that were not well-formed triples.
    pub skipped: usize,
}

/// Node ids are insertion ordinals, so sorting by id is insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Node id to the tool-call index whose observation introduced it.
    pub provenance: BTreeMap<u32, u32>,
    #[serde(skip)]
    by_label: HashMap<String, u32>,
    #[serde(skip)]
    edge_keys: HashSet<(u32, u32, String)>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_by_label(&self, label: &str) -> Option<&Node> {
        self.by_label.get(&fold(label)).map(|&id| &self.nodes[id as usize])
    }

    fn intern(&mut self, label: &str, kind: NodeKind, origin: Option<u32>) -> (u32, bool) {
        let key = fold(label);
        if let Some(&id) = self.by_label.get(&key) {
            return (id, false);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { id, label: label.to_string(), kind });
        self.by_label.insert(key, id);
        if let Some(origin) = origin {
            self.provenance.insert(id, origin);
        }
        (id, true)
    }

    /// Adds parsed triples; returns the report of what changed.
    pub fn add_triples(&mut self, triples: &[Triple], origin: Option<u32>) -> IngestReport {
        let mut report = IngestReport::default();
        for t in triples {
            let (src, new_s) = self.intern(&t.subject, NodeKind::Entity, origin);
            let (dst, new_o) = self.intern(&t.object, NodeKind::Fact, origin);
            report.new_nodes += usize::from(new_s) + usize::from(new_o);
            let key = (src, dst, fold(&t.relation));
            if self.edge_keys.insert(key) {
                self.edges.push(Edge { src, dst, relation: t.relation.clone() });
                report.added.push(t.clone());
            }
        }
        report
    }

    /// Renders the `top_m` best-matching nodes with their incident edges,
    /// one edge per line. Ties keep insertion order.
    pub fn query(&self, question: &str, top_m: usize) -> String {
        if self.nodes.is_empty() {
            return MINDMAP_EMPTY.to_string();
        }
        let wanted = token_set(question);
        let mut ranked: Vec<(usize, &Node)> = self
            .nodes
            .iter()
            .map(|n| (token_set(&n.label).intersection(&wanted).count(), n))
            .collect();
        // Stable sort keeps older nodes first among equal scores.
        ranked.sort_by_key(|r| std::cmp::Reverse(r.0));

        let mut lines = Vec::new();
        let mut shown = HashSet::new();
        for (_, node) in ranked.into_iter().take(top_m.max(1)) {
            for (i, edge) in self.edges.iter().enumerate() {
                if (edge.src == node.id || edge.dst == node.id) && shown.insert(i) {
                    lines.push(format!(
                        "{} | {} | {}",
                        self.nodes[edge.src as usize].label, edge.relation, self.nodes[edge.dst as usize].label
                    ));
                }
            }
        }
        lines.join("\n")
    }

    /// True when every edge references an existing node and ids are dense.
    pub fn is_consistent(&self) -> bool {
        let n = self.nodes.len() as u32;
        self.nodes.iter().enumerate().all(|(i, node)| node.id == i as u32)
            && self.edges.iter().all(|e| e.src < n && e.dst < n)
            && self.provenance.keys().all(|&id| id < n)
    }

    /// Rebuilds the lookup indexes after deserialization.
    pub fn reindex(&mut self) {
        self.by_label = self.nodes.iter().map(|n| (fold(&n.label), n.id)).collect();
        self.edge_keys = self.edges.iter().map(|e| (e.src, e.dst, fold(&e.relation))).collect();
    }
}

fn fold(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Parses a tab-separated triple reply. Returns the triples and the number of
/// non-blank lines that did not hold exactly three non-empty fields.
pub fn parse_triples(reply: &str) -> (Vec<Triple>, usize) {
    let mut triples = Vec::new();
    let mut skipped = 0;
    for line in reply.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields.as_slice() {
            [s, r, o] if !s.is_empty() && !r.is_empty() && !o.is_empty() => {
                triples.push(Triple { subject: s.to_string(), relation: r.to_string(), object: o.to_string() })
            }
            _ => skipped += 1,
        }
    }
    (triples, skipped)
}

/// Observations that carry no findings worth filing.
fn is_sentinel(observation: &str) -> bool {
    const PREFIXES: [&str; 7] = [
        crate::search::NO_RESULTS,
        crate::search::SEARCH_FAILED,
        crate::coding::CODE_EXECUTION_FAILED,
        crate::coding::EMPTY_OUTPUT,
        MINDMAP_EMPTY,
        crate::controller::TOOL_BUDGET_EXHAUSTED,
        crate::controller::TOOL_FAILED,
    ];
    let trimmed = observation.trim();
    trimmed.is_empty() || PREFIXES.iter().any(|p| trimmed.starts_with(p))
}

/// The graph plus bookkeeping for one task run.
#[derive(Debug, Clone)]
pub struct MindMapAgent {
    pub graph: KnowledgeGraph,
    pub top_m: usize,
    seen_passages: HashSet<[u8; 32]>,
    ingested_upto: usize,
    pub skipped_lines: usize,
}

impl MindMapAgent {
    pub fn new(top_m: usize) -> Self {
        MindMapAgent {
            graph: KnowledgeGraph::new(),
            top_m,
            seen_passages: HashSet::new(),
            ingested_upto: 0,
            skipped_lines: 0,
        }
    }

    /// One model call extracting triples from `passage`. A passage already
    /// ingested is skipped without a model call.
    pub async fn ingest(
        &mut self,
        session: &mut ModelSession<'_>,
        system_prompt: &str,
        passage: &str,
        origin: Option<u32>,
        thinking: bool,
    ) -> Result<IngestReport, GatewayError> {
        let passage = passage.trim();
        if passage.is_empty() {
            return Err(GatewayError::Precondition("mind-map passage is empty".into()));
        }
        let digest: [u8; 32] = Sha256::digest(passage.as_bytes()).into();
        if self.seen_passages.contains(&digest) {
            return Ok(IngestReport::default());
        }
        let request = format!("Passage:\n{passage}");
        let reply = session.ask(AgentRole::MindMap, system_prompt, vec![Message::user(request)], thinking).await?;
        self.seen_passages.insert(digest);
        let (triples, skipped) = parse_triples(&reply.content);
        self.skipped_lines += skipped;
        let mut report = self.graph.add_triples(&triples, origin);
        report.skipped = skipped;
        Ok(report)
    }

    /// Files every new tool observation from `history`, then answers `query`.
    pub async fn invoke(
        &mut self,
        session: &mut ModelSession<'_>,
        system_prompt: &str,
        history: &[ToolCallRecord],
        query: &str,
        thinking: bool,
    ) -> Result<String, GatewayError> {
        for record in &history[self.ingested_upto.min(history.len())..] {
            if record.tool != AgentRole::MindMap && record.error.is_none() && !is_sentinel(&record.observation) {
                self.ingest(session, system_prompt, &record.observation, Some(record.index), thinking).await?;
            }
        }
        self.ingested_upto = history.len();
        Ok(self.graph.query(query, self.top_m))
    }
}
