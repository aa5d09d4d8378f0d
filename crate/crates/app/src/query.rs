//! Read-side service shared by the CLI and the HTTP server.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use conditor_core::index::{IndexSnapshot, Query, QueryError};
use conditor_core::store::{Store, MANIFEST};
use conditor_core::topicmap::TopicMap;
use serde::Serialize;

use crate::build::STORE_DIR;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub id: u64,
    pub score: f64,
    pub name: String,
    pub snippet: String,
}

impl SearchHit {
    /// `id TAB score TAB name TAB snippet`
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.id, self.score, self.name, self.snippet)
    }
}

/// Accepts either a store directory or a build output directory containing
/// `store/`.
pub fn resolve_store_dir(dir: &Path) -> PathBuf {
    if !dir.join(MANIFEST).exists() && dir.join(STORE_DIR).join(MANIFEST).exists() {
        dir.join(STORE_DIR)
    } else {
        dir.to_path_buf()
    }
}

pub fn open_store(dir: &Path) -> Result<Store> {
    let path = resolve_store_dir(dir);
    Store::open(&path).with_context(|| format!("cannot open store {}", path.display()))
}

/// Immutable snapshot of a store: the full map plus its index.
#[derive(Debug)]
pub struct QueryService {
    pub map: TopicMap,
    pub index: IndexSnapshot,
}

impl QueryService {
    pub fn open(dir: &Path) -> Result<QueryService> {
        let store = open_store(dir)?;
        let map = store.load()?;
        let index = store.index()?.ok_or_else(|| anyhow!("store {} has no index", store.path().display()))?;
        Ok(QueryService { map, index })
    }

    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>, QueryError> {
        let q = Query::parse(query)?;
        let hits = self.index.search(&q, k)?;
        Ok(hits
            .into_iter()
            .map(|h| SearchHit {
                id: h.topic_id,
                score: h.score,
                name: self.map.topics.get(&h.topic_id).map(|t| t.base_name.clone()).unwrap_or_default(),
                snippet: h.snippet,
            })
            .collect())
    }
}
