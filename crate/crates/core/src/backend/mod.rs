//! Chat-completion backends behind one synchronous trait.
//!
//! Every agent turn goes through [`ChatBackend::complete`]. The HTTP
//! implementation speaks the ubiquitous `/chat/completions` wire shape;
//! the caching, recording, and replay wrappers compose around any inner
//! backend keyed by a content digest, so reruns and tests never depend
//! on request ordering or wall-clock state.

mod canned;
mod http;
mod replay;
mod scripted;
mod store;

pub use canned::CannedBackend;
pub use http::{BackendSettingsError, HttpBackend};
pub use replay::{ReplayBackend, ReplayRecord, RecordingBackend};
pub use scripted::{ScriptedBackend, ScriptedCall};
pub use store::CachingBackend;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::prompt::ChatPrompt;

/// One request to a chat model. The tag names the originating example and
/// step for logs and error messages; it never influences the response.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: ChatPrompt,
    pub request_tag: String,
}

/// Why the model stopped generating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Other,
}

impl FinishReason {
    pub fn from_wire(reason: Option<&str>) -> FinishReason {
        match reason {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            _ => FinishReason::Other,
        }
    }
}

/// Token accounting when the server reports it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Where a completion came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Live,
    Cache,
    Replay,
    Script,
}

/// One model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    pub provenance: Provenance,
}

/// A synchronous chat-completion provider. Implementations must be safe
/// to call from several worker threads at once.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        (**self).complete(request)
    }
}

#[derive(Serialize)]
struct DigestPayload<'a> {
    messages: &'a [crate::prompt::ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

/// Hex SHA-256 over the prompt content and decoding parameters. Two
/// prompts digest equal exactly when the model would see the same input.
pub fn prompt_digest(prompt: &ChatPrompt) -> String {
    let payload = DigestPayload {
        messages: &prompt.messages,
        temperature: prompt.decoding.temperature,
        max_tokens: prompt.decoding.max_tokens,
    };
    let bytes = serde_json::to_vec(&payload).expect("digest payload serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Cache key for a full request: the prompt digest plus the model name.
/// The request tag is deliberately excluded so retries and resumed runs
/// hit the same entry.
pub fn cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.model.as_bytes());
    hasher.update([0u8]);
    hasher.update(prompt_digest(&request.prompt).as_bytes());
    hex::encode(hasher.finalize())
}

/// Connection and retry settings for the live backend.
#[derive(Clone)]
pub struct BackendConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub retry_backoff: Vec<Duration>,
    pub max_in_flight: usize,
}

impl std::fmt::Debug for BackendConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &"<redacted>")
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("retry_backoff", &self.retry_backoff)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "http://localhost:8000/v1".into(),
            api_key: String::new(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            retry_backoff: vec![
                Duration::from_millis(500),
                Duration::from_millis(1000),
                Duration::from_millis(2000),
            ],
            max_in_flight: 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{ChatMessage, ChatPrompt, DecodingParams};

    fn request(tag: &str) -> CompletionRequest {
        CompletionRequest {
            model: "test-model".into(),
            prompt: ChatPrompt::new(vec![
                ChatMessage::system("You are helpful."),
                ChatMessage::user("Hello."),
            ]),
            request_tag: tag.into(),
        }
    }

    #[test]
    fn digest_is_stable_and_hex() {
        let a = prompt_digest(&request("a").prompt);
        let b = prompt_digest(&request("b").prompt);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn cache_key_ignores_tag_but_not_model_or_decoding() {
        let base = request("one");
        let mut other_tag = request("two");
        other_tag.request_tag = "two".into();
        assert_eq!(cache_key(&base), cache_key(&other_tag));

        let mut other_model = request("one");
        other_model.model = "different".into();
        assert_ne!(cache_key(&base), cache_key(&other_model));

        let mut other_decoding = request("one");
        other_decoding.prompt = other_decoding.prompt.with_decoding(DecodingParams {
            temperature: 0.7,
            max_tokens: 512,
        });
        assert_ne!(cache_key(&base), cache_key(&other_decoding));
    }

    #[test]
    fn digest_depends_on_message_order_and_content() {
        let forward = ChatPrompt::new(vec![
            ChatMessage::system("A"),
            ChatMessage::user("B"),
        ]);
        let reversed = ChatPrompt::new(vec![
            ChatMessage::system("B"),
            ChatMessage::user("A"),
        ]);
        assert_ne!(prompt_digest(&forward), prompt_digest(&reversed));
    }

    #[test]
    fn finish_reason_wire_mapping() {
        assert_eq!(FinishReason::from_wire(Some("stop")), FinishReason::Stop);
        assert_eq!(FinishReason::from_wire(Some("length")), FinishReason::Length);
        assert_eq!(
            FinishReason::from_wire(Some("content_filter")),
            FinishReason::Other
        );
        assert_eq!(FinishReason::from_wire(None), FinishReason::Other);
    }

    #[test]
    fn backend_config_debug_redacts_key() {
        let config = BackendConfig {
            api_key: "sk-secret".into(),
            ..BackendConfig::default()
        };
        let rendered = format!("{config:?}");
        assert!(!rendered.contains("sk-secret"));
        assert!(rendered.contains("<redacted>"));
    }
}
