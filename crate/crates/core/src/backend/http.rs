//! Live backend speaking the `/chat/completions` wire shape.
//!
//! Retries are limited to transient failures: HTTP 429, any 5xx, and
//! transport-level timeout or connect errors. Anything else in the 4xx
//! range is terminal and surfaces the response body excerpt. A
//! mutex-and-condvar gate bounds concurrent requests across all worker
//! threads sharing the backend.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::ChatMessage;

use super::{
    BackendConfig, ChatBackend, Completion, CompletionRequest, FinishReason, Provenance,
    TokenUsage,
};

/// Error raised while constructing the backend, before any request runs.
#[derive(Debug, thiserror::Error)]
#[error("backend setup: {0}")]
pub struct BackendSettingsError(pub String);

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
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
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

struct InFlightGate {
    active: Mutex<usize>,
    released: Condvar,
    limit: usize,
}

impl InFlightGate {
    fn new(limit: usize) -> InFlightGate {
        InFlightGate {
            active: Mutex::new(0),
            released: Condvar::new(),
            limit: limit.max(1),
        }
    }

    fn acquire(&self) {
        let mut active = self.active.lock().expect("gate lock");
        while *active >= self.limit {
            active = self.released.wait(active).expect("gate wait");
        }
        *active += 1;
    }

    fn release(&self) {
        let mut active = self.active.lock().expect("gate lock");
        *active -= 1;
        self.released.notify_one();
    }
}

/// Blocking HTTP client for any server exposing `{base_url}/chat/completions`.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    config: BackendConfig,
    endpoint: String,
    gate: InFlightGate,
    requests_sent: AtomicU64,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> std::result::Result<HttpBackend, BackendSettingsError> {
        if config.base_url.trim().is_empty() {
            return Err(BackendSettingsError("base_url is empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendSettingsError(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(HttpBackend {
            client,
            gate: InFlightGate::new(config.max_in_flight),
            endpoint,
            config,
            requests_sent: AtomicU64::new(0),
        })
    }

    /// Total HTTP requests issued, including retries.
    pub fn requests_sent(&self) -> u64 {
        self.requests_sent.load(Ordering::SeqCst)
    }

    fn backoff_for(&self, attempt: u32) -> std::time::Duration {
        if self.config.retry_backoff.is_empty() {
            return std::time::Duration::from_millis(500);
        }
        let index = (attempt as usize).min(self.config.retry_backoff.len() - 1);
        self.config.retry_backoff[index]
    }

    fn send_once(&self, request: &CompletionRequest) -> Attempt {
        let body = WireRequest {
            model: &request.model,
            messages: &request.prompt.messages,
            temperature: request.prompt.decoding.temperature,
            max_tokens: request.prompt.decoding.max_tokens,
        };
        self.requests_sent.fetch_add(1, Ordering::SeqCst);
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.config.api_key)
            .json(&body)
            .send();
        let response = match response {
            Ok(response) => response,
            Err(e) if e.is_timeout() || e.is_connect() => {
                return Attempt::Transient(format!("transport: {e}"));
            }
            Err(e) => {
                return Attempt::Fatal(Error::Transport {
                    request_tag: request.request_tag.clone(),
                    message: e.to_string(),
                });
            }
        };
        let status = response.status();
        let text = match response.text() {
            Ok(text) => text,
            Err(e) => return Attempt::Transient(format!("body read: {e}")),
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Transient(format!("status {}", status.as_u16()));
        }
        if !status.is_success() {
            let excerpt: String = text.chars().take(200).collect();
            return Attempt::Fatal(Error::Protocol {
                request_tag: request.request_tag.clone(),
                status: status.as_u16(),
                body_excerpt: excerpt,
            });
        }
        let parsed: WireResponse = match serde_json::from_str(&text) {
            Ok(parsed) => parsed,
            Err(e) => {
                return Attempt::Fatal(Error::MalformedResponse {
                    request_tag: request.request_tag.clone(),
                    message: format!("invalid response JSON: {e}"),
                });
            }
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Attempt::Fatal(Error::MalformedResponse {
                request_tag: request.request_tag.clone(),
                message: "response has no choices".into(),
            });
        };
        let Some(content) = choice.message.content else {
            return Attempt::Fatal(Error::MalformedResponse {
                request_tag: request.request_tag.clone(),
                message: "choice has no message content".into(),
            });
        };
        let finish_reason = FinishReason::from_wire(choice.finish_reason.as_deref());
        if finish_reason == FinishReason::Stop && content.trim().is_empty() {
            return Attempt::Fatal(Error::MalformedResponse {
                request_tag: request.request_tag.clone(),
                message: "stop completion with empty content".into(),
            });
        }
        Attempt::Done(Completion {
            content,
            finish_reason,
            usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
            provenance: Provenance::Live,
        })
    }
}

enum Attempt {
    Done(Completion),
    Transient(String),
    Fatal(Error),
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        self.gate.acquire();
        let result = self.complete_gated(request);
        self.gate.release();
        result
    }
}

impl HttpBackend {
    fn complete_gated(&self, request: &CompletionRequest) -> Result<Completion> {
        let mut last_transient = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.send_once(request) {
                Attempt::Done(completion) => return Ok(completion),
                Attempt::Fatal(error) => return Err(error),
                Attempt::Transient(message) => {
                    log::warn!(
                        "request {} attempt {} failed transiently: {message}",
                        request.request_tag,
                        attempt + 1
                    );
                    last_transient = message;
                    if attempt < self.config.max_retries {
                        std::thread::sleep(self.backoff_for(attempt));
                    }
                }
            }
        }
        Err(Error::Transport {
            request_tag: request.request_tag.clone(),
            message: format!(
                "gave up after {} attempts; last failure: {last_transient}",
                self.config.max_retries + 1
            ),
        })
    }
}
