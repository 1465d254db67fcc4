//! Transport abstraction over the chat-completions wire protocol.

use serde::{Deserialize, Serialize};
use std::time::Duration;

use super::types::{ChatMessage, ChatRequest, ChatResponse, TokenScore, Usage};

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransportError {
    #[error("http {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Parse(String),
}

impl TransportError {
    /// Network failures and HTTP errors are retried; a malformed success
    /// body is not.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, TransportError::Parse(_))
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;
}

/// Environment variable holding the API credential. Never read from config
/// files or flags.
pub const API_KEY_ENV: &str = "D2D_API_KEY";

/// Blocking client for an OpenAI-compatible `/v1/chat/completions` endpoint.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: String,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("url", &self.url)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpTransport {
    /// Reads the credential from [`API_KEY_ENV`]; absent key is an immediate
    /// error, before any network activity.
    pub fn from_env(base_url: &str) -> Result<Self, TransportError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| TransportError::Network(format!("{API_KEY_ENV} is not set")))?;
        Ok(HttpTransport {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
            url: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    logprobs: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_logprobs: Option<u8>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    logprobs: Option<WireLogprobs>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireLogprobs {
    #[serde(default)]
    content: Vec<WireTokenLogprob>,
}

#[derive(Deserialize)]
struct WireTokenLogprob {
    #[serde(default)]
    top_logprobs: Vec<WireTopLogprob>,
}

#[derive(Deserialize)]
struct WireTopLogprob {
    token: String,
    logprob: f64,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let body = WireRequest {
            model: &request.model_id,
            messages: &request.messages,
            temperature: request.temperature,
            logprobs: request.logprobs_requested,
            top_logprobs: request.logprobs_requested.then_some(8),
        };
        let response = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let response = match response {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(TransportError::Http { status, body });
            }
            Err(ureq::Error::Transport(t)) => return Err(TransportError::Network(t.to_string())),
        };
        let wire: WireResponse = response
            .into_json()
            .map_err(|e| TransportError::Parse(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError::Parse("no choices in response".into()))?;
        let text = choice
            .message
            .content
            .ok_or_else(|| TransportError::Parse("choice has no content".into()))?;
        // The distribution over the first generated token backs
        // logprob-weighted scoring (judges are told to answer with the score
        // token first).
        let token_scores = choice.logprobs.and_then(|lp| {
            lp.content.into_iter().next().map(|pos| {
                pos.top_logprobs
                    .into_iter()
                    .map(|t| TokenScore { token: t.token, logprob: t.logprob })
                    .collect::<Vec<_>>()
            })
        });
        let usage = wire
            .usage
            .map(|u| Usage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
            .unwrap_or_default();
        Ok(ChatResponse { text, token_scores, usage })
    }
}
