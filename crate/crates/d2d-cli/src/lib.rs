//! Command-line pipeline driver: configuration loading, run orchestration,
//! artifact persistence, and the auxiliary profile / eval / render commands.
//!
//! Library-shaped so integration tests can drive runs in-process with
//! injected transports; `src/main.rs` is a thin argument-parsing shell.

pub mod commands;
pub mod manifest;
pub mod run;
pub mod settings;
pub mod stub;

/// One error type for everything the binary reports; the process exits
/// nonzero on any of these.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
}
