//! Chat request/response types and the request fingerprint.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// Names the response schema a structured call expects. Part of the
    /// fingerprint, so the same prompt under different schemas records
    /// separately.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_tag: Option<String>,
    /// Whether the transport should ask for token log-probabilities.
    /// Deliberately *not* part of the fingerprint.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub logprobs_requested: bool,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>, temperature: f64) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            messages,
            temperature,
            schema_tag: None,
            logprobs_requested: false,
        }
    }

    pub fn with_schema_tag(mut self, tag: impl Into<String>) -> Self {
        self.schema_tag = Some(tag.into());
        self
    }

    pub fn with_logprobs(mut self) -> Self {
        self.logprobs_requested = true;
        self
    }

    /// Stable SHA-256 fingerprint over model id, ordered messages,
    /// temperature, and schema tag. Hex-encoded. Identical across platforms
    /// and process restarts; independent of `logprobs_requested`.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            model_id: &'a str,
            messages: &'a [ChatMessage],
            temperature: f64,
            schema_tag: &'a Option<String>,
        }
        let canon = Canon {
            model_id: &self.model_id,
            messages: &self.messages,
            temperature: self.temperature,
            schema_tag: &self.schema_tag,
        };
        let bytes = serde_json::to_vec(&canon).expect("canonical request serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// First 96 characters of the last user message, for cassette diagnostics.
    pub fn last_user_prefix(&self) -> String {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.chars().take(96).collect())
            .unwrap_or_default()
    }
}

/// One candidate token with its log-probability, taken from the first
/// generated position. Used by logprob-weighted rubric scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    pub logprob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_scores: Option<Vec<TokenScore>>,
    #[serde(default)]
    pub usage: Usage,
}

impl ChatResponse {
    pub fn text_only(text: impl Into<String>) -> Self {
        ChatResponse { text: text.into(), token_scores: None, usage: Usage::default() }
    }
}
