//! On-disk completion cache keyed by content digest.
//!
//! Each entry is one JSON file named `{cache_key}.json`. Writes go through
//! a temporary file and rename so a crash mid-write never leaves a
//! readable-but-truncated entry. Corrupt entries are treated as misses.

use std::fs;
use std::path::PathBuf;

use crate::error::{Error, Result};

use super::{cache_key, ChatBackend, Completion, CompletionRequest, Provenance};

/// Wraps any backend with a persistent response cache.
pub struct CachingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: ChatBackend> CachingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Result<CachingBackend<B>> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(CachingBackend { inner, dir })
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn read_entry(&self, key: &str) -> Option<Completion> {
        let path = self.entry_path(key);
        let raw = fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<Completion>(&raw) {
            Ok(completion) => Some(completion),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                None
            }
        }
    }

    fn write_entry(&self, key: &str, completion: &Completion) -> Result<()> {
        let path = self.entry_path(key);
        let temp = self.dir.join(format!(".{key}.tmp"));
        let json = serde_json::to_string(completion)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        fs::write(&temp, json).map_err(|e| Error::io(temp.display().to_string(), e))?;
        fs::rename(&temp, &path).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

impl<B: ChatBackend> ChatBackend for CachingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let key = cache_key(request);
        if let Some(mut hit) = self.read_entry(&key) {
            hit.provenance = Provenance::Cache;
            return Ok(hit);
        }
        let completion = self.inner.complete(request)?;
        self.write_entry(&key, &completion)?;
        Ok(completion)
    }
}
