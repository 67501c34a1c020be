use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugKind {
    /// Code generated from a query; query side.
    Exemplar,
    /// Natural-language summary of a codebase entry; code side.
    Summary,
    /// Code regenerated from a summary; code side.
    Rewrite,
}

impl AugKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AugKind::Exemplar => "exemplar",
            AugKind::Summary => "summary",
            AugKind::Rewrite => "rewrite",
        }
    }

    pub fn is_query_side(self) -> bool {
        self == AugKind::Exemplar
    }
}

impl fmt::Display for AugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exemplar" => Ok(AugKind::Exemplar),
            "summary" => Ok(AugKind::Summary),
            "rewrite" => Ok(AugKind::Rewrite),
            other => Err(Error::Config(format!("unknown augmentation kind {other:?}"))),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One persisted LLM output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub source_id: String,
    pub kind: AugKind,
    pub index: u32,
    pub model: String,
    pub text: String,
    /// Set when the completion hit the output-token limit. Omitted from the
    /// file unless true.
    #[serde(default, skip_serializing_if = "is_false")]
    pub truncated: bool,
}

type RecordKey = (String, AugKind, String, u32);

impl AugmentationRecord {
    fn key(&self) -> RecordKey {
        (self.source_id.clone(), self.kind, self.model.clone(), self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// Same key and same text was already present; nothing written.
    Unchanged,
    /// Same key with different text; the new record wins.
    Overwritten,
}

/// Append-only JSON-lines store of augmentation records.
///
/// Keys are `(source_id, kind, index, model)`. Writing an existing key with
/// different text appends the new line and logs a warning; on reload the
/// last line for a key wins.
#[derive(Debug)]
pub struct AugmentationStore {
    path: Option<PathBuf>,
    records: RwLock<BTreeMap<RecordKey, AugmentationRecord>>,
    writer: Mutex<Option<File>>,
}

impl AugmentationStore {
    pub fn in_memory() -> Self {
        AugmentationStore {
            path: None,
            records: RwLock::new(BTreeMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Opens (creating if needed) a store file and replays its contents.
    pub fn open(path: &Path) -> Result<Self> {
        let mut records = BTreeMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: AugmentationRecord =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                records.insert(rec.key(), rec);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(AugmentationStore {
            path: Some(path.to_path_buf()),
            records: RwLock::new(records),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn insert(&self, rec: AugmentationRecord) -> Result<InsertOutcome> {
        // Holding the writer lock for the whole call serializes writers.
        let mut writer = self.writer.lock().expect("store writer poisoned");
        let key = rec.key();
        let outcome = match self.records.read().expect("store poisoned").get(&key) {
            Some(prev) if prev.text == rec.text && prev.truncated == rec.truncated => {
                return Ok(InsertOutcome::Unchanged)
            }
            Some(_) => {
                log::warn!(
                    "overwriting {} #{} for {} ({})",
                    rec.kind,
                    rec.index,
                    rec.source_id,
                    rec.model
                );
                InsertOutcome::Overwritten
            }
            None => InsertOutcome::Inserted,
        };
        if let Some(file) = writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new("<store>"));
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
            file.flush().map_err(|e| Error::io(path, e))?;
        }
        self.records.write().expect("store poisoned").insert(key, rec);
        Ok(outcome)
    }

    /// All records for one source, kind and model, ordered by index.
    pub fn records(&self, source_id: &str, kind: AugKind, model: &str) -> Vec<AugmentationRecord> {
        let lo = (source_id.to_string(), kind, model.to_string(), 0);
        let hi = (source_id.to_string(), kind, model.to_string(), u32::MAX);
        self.records
            .read()
            .expect("store poisoned")
            .range(lo..=hi)
            .map(|(_, r)| r.clone())
            .collect()
    }

    /// Texts at indices `0..n`, or `None` when any index in that prefix is missing.
    pub fn prefix(&self, source_id: &str, kind: AugKind, model: &str, n: usize) -> Option<Vec<String>> {
        let recs = self.records(source_id, kind, model);
        let out: Vec<String> = recs
            .into_iter()
            .take_while({
                let mut expect = 0u32;
                move |r| {
                    let ok = r.index == expect;
                    expect += 1;
                    ok
                }
            })
            .take(n)
            .map(|r| r.text)
            .collect();
        (out.len() == n).then_some(out)
    }

    /// Length of the contiguous index prefix stored for a source.
    pub fn available(&self, source_id: &str, kind: AugKind, model: &str) -> usize {
        self.records(source_id, kind, model)
            .iter()
            .enumerate()
            .take_while(|(i, r)| r.index as usize == *i)
            .count()
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self
            .records
            .read()
            .expect("store poisoned")
            .keys()
            .map(|k| k.2.clone())
            .collect();
        m.sort();
        m.dedup();
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, kind: AugKind, index: u32, text: &str) -> AugmentationRecord {
        AugmentationRecord {
            source_id: id.into(),
            kind,
            index,
            model: "m".into(),
            text: text.into(),
            truncated: false,
        }
    }

    #[test]
    fn persists_and_replays_with_last_write_winning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aug.jsonl");
        {
            let store = AugmentationStore::open(&path).unwrap();
            assert_eq!(store.insert(rec("a", AugKind::Exemplar, 0, "x")).unwrap(), InsertOutcome::Inserted);
            assert_eq!(store.insert(rec("a", AugKind::Exemplar, 0, "x")).unwrap(), InsertOutcome::Unchanged);
            assert_eq!(store.insert(rec("a", AugKind::Exemplar, 0, "y")).unwrap(), InsertOutcome::Overwritten);
            store.insert(rec("a", AugKind::Exemplar, 1, "z")).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().starts_with(
            "{\"source_id\":\"a\",\"kind\":\"exemplar\",\"index\":0,\"model\":\"m\",\"text\":\"x\"}"
        ));
        let store = AugmentationStore::open(&path).unwrap();
        assert_eq!(store.prefix("a", AugKind::Exemplar, "m", 2).unwrap(), vec!["y", "z"]);
        assert_eq!(store.available("a", AugKind::Exemplar, "m"), 2);
        assert!(store.prefix("a", AugKind::Exemplar, "m", 3).is_none());
        assert!(store.prefix("a", AugKind::Rewrite, "m", 1).is_none());
    }

    #[test]
    fn prefix_requires_contiguous_indices() {
        let store = AugmentationStore::in_memory();
        store.insert(rec("a", AugKind::Rewrite, 0, "r0")).unwrap();
        store.insert(rec("a", AugKind::Rewrite, 2, "r2")).unwrap();
        assert_eq!(store.available("a", AugKind::Rewrite, "m"), 1);
        assert!(store.prefix("a", AugKind::Rewrite, "m", 2).is_none());
        assert_eq!(store.prefix("a", AugKind::Rewrite, "m", 0).unwrap(), Vec::<String>::new());
    }
}
