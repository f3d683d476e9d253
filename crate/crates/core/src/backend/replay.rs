//! Record and replay of completions as JSON Lines.
//!
//! The recording wrapper appends one line per completion keyed by the
//! request's cache key. The replay backend loads such a file up front and
//! serves every request from memory, touching no network at all; on
//! duplicate keys the last record wins, so a re-recorded run supersedes
//! earlier lines. A request whose key is absent is an error rather than a
//! silent fallthrough.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cache_key, ChatBackend, Completion, CompletionRequest, FinishReason, Provenance, TokenUsage};

/// One recorded exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub request_tag: String,
    pub model: String,
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

/// Passes requests through and appends each completion to a JSONL file.
pub struct RecordingBackend<B> {
    inner: B,
    file: Mutex<fs::File>,
    path: PathBuf,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl Into<PathBuf>) -> Result<RecordingBackend<B>> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)
                    .map_err(|e| Error::io(parent.display().to_string(), e))?;
            }
        }
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(RecordingBackend {
            inner,
            file: Mutex::new(file),
            path,
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let completion = self.inner.complete(request)?;
        let record = ReplayRecord {
            key: cache_key(request),
            request_tag: request.request_tag.clone(),
            model: request.model.clone(),
            content: completion.content.clone(),
            finish_reason: completion.finish_reason,
            usage: completion.usage,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::json(self.path.display().to_string(), e))?;
        let mut file = self.file.lock().expect("record file lock");
        writeln!(file, "{line}").map_err(|e| Error::io(self.path.display().to_string(), e))?;
        Ok(completion)
    }
}

/// Serves completions from a previously recorded JSONL file.
pub struct ReplayBackend {
    records: HashMap<String, ReplayRecord>,
}

impl ReplayBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<ReplayBackend> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut records = HashMap::new();
        for (index, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{}:{}", path.display(), index + 1), e))?;
            records.insert(record.key.clone(), record);
        }
        Ok(ReplayBackend { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let key = cache_key(request);
        let record = self.records.get(&key).ok_or_else(|| Error::ReplayMiss {
            request_tag: request.request_tag.clone(),
            key: key.clone(),
        })?;
        Ok(Completion {
            content: record.content.clone(),
            finish_reason: record.finish_reason,
            usage: record.usage,
            provenance: Provenance::Replay,
        })
    }
}
