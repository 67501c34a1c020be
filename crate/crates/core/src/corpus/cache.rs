use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// SHA-256 digest over (prompt, model, temperature, sample index).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(prompt: &str, model: &str, temperature: f64, sample_index: u32) -> Self {
        let mut h = Sha256::new();
        // Length prefixes keep field boundaries unambiguous.
        for field in [prompt.as_bytes(), model.as_bytes()] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field);
        }
        h.update(temperature.to_bits().to_le_bytes());
        h.update(sample_index.to_le_bytes());
        CacheKey(hex::encode(h.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    value: String,
}

/// Content-addressed completion cache backed by an append-only JSON-lines
/// file. Readers run concurrently; writers are serialized.
#[derive(Debug)]
pub struct LlmCache {
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
}

impl LlmCache {
    pub fn in_memory() -> Self {
        LlmCache {
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(Error::Storage)?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(Error::Storage)?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: Entry = serde_json::from_str(&line)
                    .map_err(|e| Error::Storage(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
                entries.insert(e.key, e.value);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(Error::Storage)?;
        Ok(LlmCache {
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn lookup(&self, key: &CacheKey) -> Option<String> {
        self.entries.read().expect("cache poisoned").get(&key.0).cloned()
    }

    /// Stores a value. A second store under the same key replaces the first
    /// and logs a warning.
    pub fn store(&self, key: &CacheKey, value: &str) -> Result<()> {
        let mut writer = self.writer.lock().expect("cache writer poisoned");
        if let Some(prev) = self.entries.read().expect("cache poisoned").get(&key.0) {
            if prev == value {
                return Ok(());
            }
            log::warn!("cache key {} overwritten", &key.0[..12]);
        }
        if let Some(file) = writer.as_mut() {
            let line = serde_json::to_string(&Entry {
                key: key.0.clone(),
                value: value.to_string(),
            })
            .expect("entry serializes");
            writeln!(file, "{line}").map_err(Error::Storage)?;
            file.flush().map_err(Error::Storage)?;
        }
        self.entries
            .write()
            .expect("cache poisoned")
            .insert(key.0.clone(), value.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_then_lookup() {
        let cache = LlmCache::in_memory();
        let k = CacheKey::new("p", "m", 1.0, 0);
        assert_eq!(cache.lookup(&k), None);
        cache.store(&k, "x").unwrap();
        assert_eq!(cache.lookup(&k).as_deref(), Some("x"));
        cache.store(&k, "y").unwrap();
        assert_eq!(cache.lookup(&k).as_deref(), Some("y"));
    }

    #[test]
    fn key_depends_on_every_field() {
        let base = CacheKey::new("p", "m", 1.0, 0);
        assert_eq!(base, CacheKey::new("p", "m", 1.0, 0));
        assert_ne!(base, CacheKey::new("q", "m", 1.0, 0));
        assert_ne!(base, CacheKey::new("p", "n", 1.0, 0));
        assert_ne!(base, CacheKey::new("p", "m", 0.5, 0));
        assert_ne!(base, CacheKey::new("p", "m", 1.0, 1));
        // Boundary between prompt and model must matter.
        assert_ne!(CacheKey::new("ab", "c", 1.0, 0), CacheKey::new("a", "bc", 1.0, 0));
    }

    #[test]
    fn survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let k = CacheKey::new("p", "m", 1.0, 3);
        LlmCache::open(&path).unwrap().store(&k, "v1").unwrap();
        {
            let c = LlmCache::open(&path).unwrap();
            assert_eq!(c.lookup(&k).as_deref(), Some("v1"));
            c.store(&k, "v2").unwrap();
        }
        assert_eq!(LlmCache::open(&path).unwrap().lookup(&k).as_deref(), Some("v2"));
    }

    #[test]
    fn io_failure_is_storage_error() {
        let dir = tempfile::tempdir().unwrap();
        // A directory cannot be opened as the cache file.
        assert!(matches!(LlmCache::open(dir.path()), Err(Error::Storage(_))));
    }
}
