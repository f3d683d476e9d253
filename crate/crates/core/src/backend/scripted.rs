//! Deterministic in-memory backend for tests and offline runs.
//!
//! Responses can be bound to an exact prompt digest, to a request tag, to
//! a per-step FIFO queue, or to a per-step default, consulted in that
//! order. The step of a request is the part of its tag after the last
//! `/`, with any `#n` suffix stripped, so `ex3/evaluate#1` matches scripts
//! for step `evaluate`. Unmatched requests fail loudly instead of
//! inventing content.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use crate::error::{Error, Result};

use super::{prompt_digest, ChatBackend, Completion, CompletionRequest, FinishReason, Provenance};

/// A request the backend has served, kept for assertions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedCall {
    pub request_tag: String,
    pub step: String,
    pub digest: String,
}

#[derive(Default)]
struct Script {
    by_digest: HashMap<String, String>,
    by_tag: HashMap<String, String>,
    step_queues: HashMap<String, VecDeque<String>>,
    step_defaults: HashMap<String, String>,
    calls: Vec<ScriptedCall>,
}

/// Scriptable test backend with interior mutability, shareable across
/// worker threads.
#[derive(Default)]
pub struct ScriptedBackend {
    script: Mutex<Script>,
}

/// step of "ex3/evaluate#1" is "evaluate".
pub fn step_of_tag(tag: &str) -> &str {
    let after_slash = tag.rsplit('/').next().unwrap_or(tag);
    after_slash.split('#').next().unwrap_or(after_slash)
}

impl ScriptedBackend {
    pub fn new() -> ScriptedBackend {
        ScriptedBackend::default()
    }

    /// Binds a response to the exact prompt digest.
    pub fn set_for_digest(&self, digest: impl Into<String>, content: impl Into<String>) {
        self.script
            .lock()
            .expect("script lock")
            .by_digest
            .insert(digest.into(), content.into());
    }

    /// Binds a response to one full request tag.
    pub fn set_for_tag(&self, tag: impl Into<String>, content: impl Into<String>) {
        self.script
            .lock()
            .expect("script lock")
            .by_tag
            .insert(tag.into(), content.into());
    }

    /// Queues responses consumed in order by requests of one step.
    pub fn push_for_step(&self, step: impl Into<String>, content: impl Into<String>) {
        self.script
            .lock()
            .expect("script lock")
            .step_queues
            .entry(step.into())
            .or_default()
            .push_back(content.into());
    }

    /// Fallback response for every request of one step.
    pub fn set_default_for_step(&self, step: impl Into<String>, content: impl Into<String>) {
        self.script
            .lock()
            .expect("script lock")
            .step_defaults
            .insert(step.into(), content.into());
    }

    pub fn call_count(&self) -> usize {
        self.script.lock().expect("script lock").calls.len()
    }

    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.script.lock().expect("script lock").calls.clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let digest = prompt_digest(&request.prompt);
        let step = step_of_tag(&request.request_tag).to_string();
        let mut script = self.script.lock().expect("script lock");
        script.calls.push(ScriptedCall {
            request_tag: request.request_tag.clone(),
            step: step.clone(),
            digest: digest.clone(),
        });
        let content = script
            .by_digest
            .get(&digest)
            .cloned()
            .or_else(|| script.by_tag.get(&request.request_tag).cloned())
            .or_else(|| {
                script
                    .step_queues
                    .get_mut(&step)
                    .and_then(|queue| queue.pop_front())
            })
            .or_else(|| script.step_defaults.get(&step).cloned());
        match content {
            Some(content) => Ok(Completion {
                content,
                finish_reason: FinishReason::Stop,
                usage: None,
                provenance: Provenance::Script,
            }),
            None => Err(Error::ScriptMiss {
                request_tag: request.request_tag.clone(),
                digest,
            }),
        }
    }
}
