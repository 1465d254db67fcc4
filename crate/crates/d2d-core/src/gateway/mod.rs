//! Model gateway with live / record / replay modes.
//!
//! Every call is fingerprinted. Record mode persists each response into a
//! cassette as it arrives; replay mode answers strictly from the cassette and
//! a miss is an error, never a silent live call. Structured calls validate
//! the extracted JSON against a schema and run a bounded repair exchange on
//! failure.

pub mod cassette;
pub mod extract;
pub mod transport;
pub mod types;

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

pub use cassette::{Cassette, CassetteEntry, RequestSummary};
pub use extract::extract_first_json;
pub use transport::{HttpTransport, Transport, TransportError, API_KEY_ENV};
pub use types::{ChatMessage, ChatRequest, ChatResponse, Role, TokenScore, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for GatewayMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            other => Err(format!("unknown mode {other:?}; expected live, record, or replay")),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub struct StructuredOutputError {
    pub attempts: u32,
    /// One list of validation errors per attempt, in order.
    pub errors_per_attempt: Vec<Vec<String>>,
}

impl std::fmt::Display for StructuredOutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "structured output invalid after {} attempts; last attempt errors: [{}]",
            self.attempts,
            self.errors_per_attempt.last().map(|e| e.join("; ")).unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failed after {attempts} attempts; last error: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("replay cassette miss for fingerprint {fingerprint}; nearest recorded request: {nearest}")]
    CassetteMiss { fingerprint: String, nearest: String },
    #[error("cassette: {0}")]
    CassetteIo(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("response schema does not compile: {0}")]
    Schema(String),
    #[error(transparent)]
    Structured(#[from] StructuredOutputError),
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub cassette_path: Option<PathBuf>,
    /// Retries after the first attempt (so 3 retries = up to 4 attempts),
    /// with backoff `base`, `2·base`, `4·base` between attempts.
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    /// Repair exchanges after the first structured attempt.
    pub max_repairs: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: GatewayMode::Replay,
            cassette_path: None,
            max_retries: 3,
            backoff_base_ms: 1000,
            max_in_flight: 4,
            max_repairs: 2,
        }
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { permits: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Thread-safe: cassette access is serialized, and an in-flight limit bounds
/// concurrent transport calls.
pub struct Gateway {
    config: GatewayConfig,
    transport: Option<Arc<dyn Transport>>,
    cassette: Mutex<Cassette>,
    semaphore: Semaphore,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.config.mode)
            .field("cassette_path", &self.config.cassette_path)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// `transport` is required for live and record modes and ignored in
    /// replay mode — replay is structurally incapable of network traffic.
    pub fn new(config: GatewayConfig, transport: Option<Arc<dyn Transport>>) -> Result<Self, GatewayError> {
        let cassette = match config.mode {
            GatewayMode::Replay => {
                let path = config
                    .cassette_path
                    .as_ref()
                    .ok_or_else(|| GatewayError::Config("replay mode requires a cassette path".into()))?;
                Cassette::load(path).map_err(|e| {
                    GatewayError::CassetteIo(format!("cannot load {}: {e}", path.display()))
                })?
            }
            GatewayMode::Record => {
                if config.cassette_path.is_none() {
                    return Err(GatewayError::Config("record mode requires a cassette path".into()));
                }
                // Appends to an existing cassette so multi-run recordings
                // accumulate; delete the file to start fresh.
                match &config.cassette_path {
                    Some(p) if p.exists() => Cassette::load(p)
                        .map_err(|e| GatewayError::CassetteIo(format!("cannot load {}: {e}", p.display())))?,
                    _ => Cassette::default(),
                }
            }
            GatewayMode::Live => Cassette::default(),
        };
        let transport = match config.mode {
            GatewayMode::Replay => None,
            _ => Some(
                transport.ok_or_else(|| GatewayError::Config("live/record mode requires a transport".into()))?,
            ),
        };
        let semaphore = Semaphore::new(config.max_in_flight);
        Ok(Gateway { config, transport, cassette: Mutex::new(cassette), semaphore })
    }

    pub fn mode(&self) -> GatewayMode {
        self.config.mode
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let _permit = self.semaphore.acquire();
        match self.config.mode {
            GatewayMode::Replay => {
                let fingerprint = request.fingerprint();
                let cassette = self.cassette.lock().unwrap();
                match cassette.get(&fingerprint) {
                    Some(entry) => Ok(entry.response.clone()),
                    None => {
                        let nearest = cassette
                            .nearest(request)
                            .map(|(fp, s)| format!("{fp} ({s})"))
                            .unwrap_or_else(|| "none (cassette is empty)".to_string());
                        Err(GatewayError::CassetteMiss { fingerprint, nearest })
                    }
                }
            }
            GatewayMode::Live => self.send_with_retries(request),
            GatewayMode::Record => {
                let response = self.send_with_retries(request)?;
                let mut cassette = self.cassette.lock().unwrap();
                cassette.insert(request, response.clone());
                if let Some(path) = &self.config.cassette_path {
                    cassette
                        .save(path)
                        .map_err(|e| GatewayError::CassetteIo(format!("cannot write {}: {e}", path.display())))?;
                }
                Ok(response)
            }
        }
    }

    fn send_with_retries(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let transport = self.transport.as_ref().expect("live/record gateway has a transport");
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            match transport.send(request) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    let retryable = e.is_retryable();
                    last = e.to_string();
                    if !retryable {
                        return Err(GatewayError::RetriesExhausted { attempts: attempt + 1, last });
                    }
                }
            }
            if attempt + 1 < attempts {
                let backoff = self.config.backoff_base_ms << attempt;
                if backoff > 0 {
                    std::thread::sleep(Duration::from_millis(backoff));
                }
            }
        }
        Err(GatewayError::RetriesExhausted { attempts, last })
    }

    /// Structured call: extract the first JSON value from the reply, validate
    /// it against `schema`, and on failure run up to `max_repairs` repair
    /// exchanges quoting the validation errors. Never returns a
    /// schema-invalid value.
    pub fn complete_structured(
        &self,
        request: &ChatRequest,
        schema: &serde_json::Value,
    ) -> Result<serde_json::Value, GatewayError> {
        let compiled = jsonschema::JSONSchema::compile(schema)
            .map_err(|e| GatewayError::Schema(e.to_string()))?;
        let mut req = request.clone();
        let mut errors_per_attempt: Vec<Vec<String>> = Vec::new();
        let attempts = self.config.max_repairs + 1;
        for attempt in 0..attempts {
            let response = self.complete(&req)?;
            let errors = match extract_first_json(&response.text) {
                Some(value) => {
                    let errors = validation_errors(&compiled, &value);
                    if errors.is_empty() {
                        return Ok(value);
                    }
                    errors
                }
                None => vec!["no JSON value found in response".to_string()],
            };
            errors_per_attempt.push(errors);
            if attempt + 1 < attempts {
                let quoted = errors_per_attempt.last().unwrap().join("; ");
                req.messages.push(ChatMessage::assistant(response.text.clone()));
                req.messages.push(ChatMessage::user(format!(
                    "That reply was not valid: {quoted}. Respond again with a single JSON value \
                     conforming to the required schema, and no surrounding text."
                )));
            }
        }
        Err(GatewayError::Structured(StructuredOutputError { attempts, errors_per_attempt }))
    }
}

/// Formats schema violations as `pointer: message` lines.
pub fn validation_errors(schema: &jsonschema::JSONSchema, value: &serde_json::Value) -> Vec<String> {
    match schema.validate(value) {
        Ok(()) => Vec::new(),
        Err(errors) => errors
            .map(|e| {
                let path = e.instance_path.to_string();
                let path = if path.is_empty() { "/".to_string() } else { path };
                format!("{path}: {e}")
            })
            .collect(),
    }
}
