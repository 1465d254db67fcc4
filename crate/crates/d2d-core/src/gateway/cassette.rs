//! Committed record/replay store: a pretty-printed JSON map from request
//! fingerprint to recorded response.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::types::{ChatRequest, ChatResponse};

pub const CASSETTE_VERSION: u32 = 1;

/// Enough of the request to diagnose a replay miss without storing the full
/// prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub model_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_tag: Option<String>,
    pub temperature: f64,
    pub message_count: usize,
    pub last_user_prefix: String,
}

impl RequestSummary {
    pub fn of(request: &ChatRequest) -> Self {
        RequestSummary {
            model_id: request.model_id.clone(),
            schema_tag: request.schema_tag.clone(),
            temperature: request.temperature,
            message_count: request.messages.len(),
            last_user_prefix: request.last_user_prefix(),
        }
    }
}

impl std::fmt::Display for RequestSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "model={} schema_tag={} messages={} last_user={:?}",
            self.model_id,
            self.schema_tag.as_deref().unwrap_or("-"),
            self.message_count,
            self.last_user_prefix
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub request_summary: RequestSummary,
    pub response: ChatResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    /// Fingerprint → entry. BTreeMap keeps the file diff-stable.
    pub entries: BTreeMap<String, CassetteEntry>,
}

impl Default for Cassette {
    fn default() -> Self {
        Cassette { version: CASSETTE_VERSION, entries: BTreeMap::new() }
    }
}

impl Cassette {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Pretty-printed with a trailing newline; creates parent directories.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("cassette serializes");
        text.push('\n');
        std::fs::write(path, text)
    }

    pub fn insert(&mut self, request: &ChatRequest, response: ChatResponse) {
        self.entries.insert(
            request.fingerprint(),
            CassetteEntry { request_summary: RequestSummary::of(request), response },
        );
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CassetteEntry> {
        self.entries.get(fingerprint)
    }

    /// Best-effort diagnostic for a miss: the recorded request most similar to
    /// the probe. Similarity favors a matching schema tag, then the longest
    /// shared prefix of the last user message. Deterministic; ties go to the
    /// smallest fingerprint (map order).
    pub fn nearest(&self, probe: &ChatRequest) -> Option<(&str, &RequestSummary)> {
        let probe_prefix = probe.last_user_prefix();
        let mut best: Option<(&str, &RequestSummary, usize)> = None;
        for (fp, entry) in &self.entries {
            let s = &entry.request_summary;
            let mut score = 0usize;
            if s.schema_tag == probe.schema_tag {
                score += 10_000;
            }
            if s.model_id == probe.model_id {
                score += 1_000;
            }
            score += common_prefix_chars(&s.last_user_prefix, &probe_prefix);
            if best.map_or(true, |(_, _, b)| score > b) {
                best = Some((fp.as_str(), s, score));
            }
        }
        best.map(|(fp, s, _)| (fp, s))
    }
}

fn common_prefix_chars(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}
