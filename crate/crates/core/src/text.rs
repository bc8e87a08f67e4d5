//! Lexical helpers shared by the mind-map ranker and the query-duplicate
//! detector.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

pub const STOPWORDS_VERSION: &str = "v1";
const STOPWORDS_V1: &str = include_str!("../assets/stopwords_v1.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_V1.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

/// Case-folded alphanumeric tokens with stop words removed, in order.
pub fn content_tokens(text: &str) -> Vec<String> {
    let stop = stopwords();
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !stop.contains(t.as_str()))
        .collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    content_tokens(text).into_iter().collect()
}
