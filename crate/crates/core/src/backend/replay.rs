use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, CompletionResult};
use crate::text::TokenCount;

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Cache key: SHA-256 over the model name and the prompt digest.
pub fn cache_key(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt_sha256(prompt).as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key_hash: String,
    pub model: String,
    pub prompt_sha256: String,
    pub response_text: String,
    pub in_tokens: u64,
    pub out_tokens: u64,
    pub latency_s: f64,
}

impl CacheEntry {
    pub fn new(model: &str, prompt: &str, result: &CompletionResult) -> Self {
        Self {
            key_hash: cache_key(model, prompt),
            model: model.to_string(),
            prompt_sha256: prompt_sha256(prompt),
            response_text: result.text.clone(),
            in_tokens: result.input_tokens.get(),
            out_tokens: result.output_tokens.get(),
            latency_s: result.latency_seconds,
        }
    }

    pub fn to_result(&self) -> CompletionResult {
        CompletionResult {
            text: self.response_text.clone(),
            input_tokens: TokenCount(self.in_tokens),
            output_tokens: TokenCount(self.out_tokens),
            latency_seconds: self.latency_s,
            backend_id: format!("replay:{}", self.model),
        }
    }
}

/// JSONL-backed completion cache. Readers share a lock; appends are
/// serialized through the writer mutex. Later lines win on duplicate keys.
#[derive(Debug)]
pub struct ReplayCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
}

impl ReplayCache {
    /// Loads `path` if it exists; a missing file is an empty cache.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| BackendError::Io(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line)
                    .map_err(|e| BackendError::Io(format!("{}:{}: {e}", path.display(), n + 1)))?;
                entries.insert(entry.key_hash.clone(), entry);
            }
        }
        Ok(Self { path, entries: RwLock::new(entries), writer: Mutex::new(None) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, model: &str, prompt: &str) -> Option<CacheEntry> {
        self.entries.read().expect("cache lock").get(&cache_key(model, prompt)).cloned()
    }

    pub fn record(&self, entry: CacheEntry) -> Result<(), BackendError> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        if writer.is_none() {
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| BackendError::Io(format!("{}: {e}", self.path.display())))?;
            *writer = Some(f);
        }
        let line = serde_json::to_string(&entry).map_err(|e| BackendError::Io(e.to_string()))?;
        let f = writer.as_mut().expect("opened above");
        writeln!(f, "{line}").map_err(|e| BackendError::Io(e.to_string()))?;
        f.flush().map_err(|e| BackendError::Io(e.to_string()))?;
        self.entries.write().expect("cache lock").insert(entry.key_hash.clone(), entry);
        Ok(())
    }
}

pub struct ReplayBackend {
    cache: ReplayCache,
    model: String,
}

impl ReplayBackend {
    pub fn new(cache: ReplayCache, model: impl Into<String>) -> Self {
        Self { cache, model: model.into() }
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        format!("replay:{}", self.model)
    }

    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        self.cache.lookup(&self.model, prompt).map(|e| e.to_result()).ok_or_else(|| BackendError::CacheMiss {
            model: self.model.clone(),
            prompt_sha256: prompt_sha256(prompt),
        })
    }
}

/// Passes calls to `inner` and appends every success to the cache.
pub struct RecordingBackend<B> {
    inner: B,
    cache: ReplayCache,
    model: String,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, cache: ReplayCache, model: impl Into<String>) -> Self {
        Self { inner, cache, model: model.into() }
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, prompt: &str) -> Result<CompletionResult, BackendError> {
        let result = self.inner.complete(prompt)?;
        self.cache.record(CacheEntry::new(&self.model, prompt, &result))?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CostModelParams, ScriptedAnswers, SimulatedBackend, SimulationOptions};

    fn sim() -> SimulatedBackend {
        let mut s = ScriptedAnswers::new();
        s.insert("q1", "answer one");
        s.insert("q2", "answer two");
        SimulatedBackend::new(CostModelParams::default(), s, SimulationOptions::default())
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let rec = RecordingBackend::new(sim(), ReplayCache::open(&path).unwrap(), "m");
        let live = rec.complete("q1").unwrap();
        rec.complete("q2").unwrap();
        assert_eq!(rec.cache().len(), 2);

        let replay = ReplayBackend::new(ReplayCache::open(&path).unwrap(), "m");
        let a = replay.complete("q1").unwrap();
        let b = replay.complete("q1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.text, live.text);
        assert_eq!(a.input_tokens, live.input_tokens);
        assert_eq!(a.latency_seconds, live.latency_seconds);
        assert!(matches!(replay.complete("q3"), Err(BackendError::CacheMiss { .. })));

        let other_model = ReplayBackend::new(ReplayCache::open(&path).unwrap(), "m2");
        assert!(other_model.complete("q1").is_err());
    }

    #[test]
    fn file_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let rec = RecordingBackend::new(sim(), ReplayCache::open(&path).unwrap(), "m");
        rec.complete("q1").unwrap();
        let line = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for field in ["key_hash", "model", "prompt_sha256", "response_text", "in_tokens", "out_tokens", "latency_s"] {
            assert!(v.get(field).is_some(), "{field}");
        }
        assert_eq!(v["prompt_sha256"], prompt_sha256("q1"));
        assert_eq!(prompt_sha256("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn corrupt_cache_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(ReplayCache::open(&path), Err(BackendError::Io(_))));
    }
}
