//! Offline knowledge lookup used to ground domain detection.

use std::collections::BTreeMap;
use std::path::Path;

pub trait KnowledgeSource: Send + Sync {
    /// Reference snippet for a term, if known. Matching is case-insensitive
    /// on the trimmed term.
    fn lookup(&self, term: &str) -> Option<String>;
}

/// Flat JSON map `{"term": "snippet", ...}` loaded from disk.
#[derive(Debug, Clone, Default)]
pub struct JsonKnowledge {
    entries: BTreeMap<String, String>,
}

impl JsonKnowledge {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let raw: BTreeMap<String, String> = serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::from_entries(raw))
    }

    pub fn from_entries(raw: impl IntoIterator<Item = (String, String)>) -> Self {
        let entries = raw
            .into_iter()
            .map(|(k, v)| (k.trim().to_lowercase(), v))
            .collect();
        JsonKnowledge { entries }
    }

    pub fn empty() -> Self {
        JsonKnowledge::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl KnowledgeSource for JsonKnowledge {
    fn lookup(&self, term: &str) -> Option<String> {
        self.entries.get(&term.trim().to_lowercase()).cloned()
    }
}
