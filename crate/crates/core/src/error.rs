//! Crate-wide error type.

use thiserror::Error;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Profile file could not be loaded or validated.
    #[error("profile error ({location}): {message}")]
    Profile { location: String, message: String },

    /// Dataset file violated its contract.
    #[error("dataset error ({location}): {message}")]
    Dataset { location: String, message: String },

    /// A prompt builder was given inputs that violate its contract.
    #[error("prompt contract violation: {0}")]
    Prompt(String),

    /// Network-level failure after exhausting retries.
    #[error("transport error for '{request_tag}': {message}")]
    Transport { request_tag: String, message: String },

    /// Terminal non-2xx HTTP status from the backend.
    #[error("backend returned status {status} for '{request_tag}': {body_excerpt}")]
    Protocol {
        request_tag: String,
        status: u16,
        body_excerpt: String,
    },

    /// 2xx response that does not carry the expected content path.
    #[error("malformed backend response for '{request_tag}': {message}")]
    MalformedResponse { request_tag: String, message: String },

    /// Scripted backend had no response for a request.
    #[error("no scripted response for '{request_tag}' (prompt digest {digest})")]
    ScriptMiss { request_tag: String, digest: String },

    /// Replay log had no record for a request.
    #[error("no replay record for '{request_tag}' (cache key {key})")]
    ReplayMiss { request_tag: String, key: String },

    /// Trace/gold alignment or metric precondition failure.
    #[error("scoring error: {0}")]
    Scoring(String),

    /// Batch runner failure outside of per-example errors.
    #[error("run error: {0}")]
    Run(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {location}: {source}")]
    Json {
        location: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(location: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            location: location.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
