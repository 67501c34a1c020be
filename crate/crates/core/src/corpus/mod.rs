//! Dataset ingestion and validation.
//!
//! A dataset lives in a directory holding `train.jsonl`, `test.jsonl` and an
//! optional `manifest.txt`. Every JSON line carries exactly the fields `id`,
//! `query` and `code`.

mod cache;
mod store;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cache::{CacheKey, LlmCache};
pub use store::{AugKind, AugmentationRecord, AugmentationStore, InsertOutcome};

use crate::config::KeyValues;
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(Language::Python),
            "java" => Ok(Language::Java),
            other => Err(Error::Config(format!("unknown language {other:?}"))),
        }
    }
}

/// One query paired with its ground-truth code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub id: String,
    pub query: String,
    pub code: String,
    pub language: Language,
}

impl PairRecord {
    pub fn new(
        id: impl Into<String>,
        query: impl Into<String>,
        code: impl Into<String>,
        language: Language,
    ) -> Self {
        PairRecord {
            id: id.into(),
            query: query.into(),
            code: code.into(),
            language,
        }
    }
}

// Upstream releases use both numeric and string ids.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Int(i64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: RawId,
    query: String,
    code: String,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    query: &'a str,
    code: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub language: Language,
    pub train: Vec<PairRecord>,
    pub test: Vec<PairRecord>,
}

impl Dataset {
    /// Validates cross-split id uniqueness. Individual splits may be empty
    /// but the dataset as a whole may not.
    pub fn new(
        name: impl Into<String>,
        language: Language,
        train: Vec<PairRecord>,
        test: Vec<PairRecord>,
    ) -> Result<Self> {
        if train.is_empty() && test.is_empty() {
            return Err(Error::NoRecords);
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (split, records) in [(0usize, &train), (1, &test)] {
            for (i, r) in records.iter().enumerate() {
                if r.query.trim().is_empty() {
                    return Err(Error::EmptyField { line: i + 1, field: "query" });
                }
                if r.code.trim().is_empty() {
                    return Err(Error::EmptyField { line: i + 1, field: "code" });
                }
                if r.language != language {
                    return Err(Error::invalid(format!(
                        "record {} is {} but dataset is {language}",
                        r.id, r.language
                    )));
                }
                match seen.insert(r.id.as_str(), split) {
                    Some(prev) if prev != split => return Err(Error::SplitCollision(r.id.clone())),
                    Some(_) => {
                        return Err(Error::invalid(format!("duplicate id {:?} within a split", r.id)))
                    }
                    None => {}
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            language,
            train,
            test,
        })
    }
}

/// Reads one JSON-lines split. Records keep file order.
pub fn load_split(path: &Path, language: Language) -> Result<Vec<PairRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_split(BufReader::new(file), language).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_split(reader: impl BufRead, language: Language) -> Result<Vec<PairRecord>> {
    let mut records = Vec::new();
    let mut lines_by_id: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<split>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: lineno,
            message: e.to_string(),
        })?;
        let id = match raw.id {
            RawId::Text(s) => s,
            RawId::Int(n) => n.to_string(),
        };
        if id.trim().is_empty() {
            return Err(Error::EmptyField { line: lineno, field: "id" });
        }
        if raw.query.trim().is_empty() {
            return Err(Error::EmptyField { line: lineno, field: "query" });
        }
        if raw.code.trim().is_empty() {
            return Err(Error::EmptyField { line: lineno, field: "code" });
        }
        if let Some(&first) = lines_by_id.get(&id) {
            return Err(Error::DuplicateId {
                id,
                first,
                second: lineno,
            });
        }
        lines_by_id.insert(id.clone(), lineno);
        records.push(PairRecord {
            id,
            query: raw.query,
            code: raw.code,
            language,
        });
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(records)
}

pub fn write_split(path: &Path, records: &[PairRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_records(w: &mut impl Write, records: &[PairRecord]) -> std::io::Result<()> {
    for r in records {
        let line = serde_json::to_string(&OutRecord {
            id: &r.id,
            query: &r.query,
            code: &r.code,
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Serializes a split to JSON-lines text.
pub fn render_split(records: &[PairRecord]) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Loads `train.jsonl` and `test.jsonl` from a dataset directory.
pub fn load_dataset(dir: &Path, name: &str, language: Language) -> Result<Dataset> {
    let train = load_split(&dir.join(TRAIN_FILE), language)?;
    let test = load_split(&dir.join(TEST_FILE), language)?;
    Dataset::new(name, language, train, test)
}

/// Loads a dataset directory, taking name and language from its manifest.
pub fn open_dataset_dir(dir: &Path) -> Result<Dataset> {
    let manifest = KeyValues::read(&dir.join(MANIFEST_FILE))?;
    let name = manifest
        .get("name")
        .ok_or_else(|| Error::Config("manifest is missing `name`".into()))?;
    let language: Language = manifest
        .get("language")
        .ok_or_else(|| Error::Config("manifest is missing `language`".into()))?
        .parse()?;
    load_dataset(dir, name, language)
}

pub fn write_dataset(dir: &Path, dataset: &Dataset, manifest: &KeyValues) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_split(&dir.join(TRAIN_FILE), &dataset.train)?;
    write_split(&dir.join(TEST_FILE), &dataset.test)?;
    let mut manifest = manifest.clone();
    manifest.set("name", &dataset.name);
    manifest.set("language", dataset.language);
    manifest.write(&dir.join(MANIFEST_FILE))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStats {
    pub count: usize,
    pub mean_query_tokens: f64,
    pub mean_code_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub name: String,
    pub train: SplitStats,
    pub test: SplitStats,
}

fn split_stats(records: &[PairRecord]) -> SplitStats {
    let mean = |f: &dyn Fn(&PairRecord) -> usize| {
        if records.is_empty() {
            0.0
        } else {
            records.iter().map(f).sum::<usize>() as f64 / records.len() as f64
        }
    };
    SplitStats {
        count: records.len(),
        mean_query_tokens: mean(&|r| r.query.split_whitespace().count()),
        mean_code_tokens: mean(&|r| r.code.split_whitespace().count()),
    }
}

/// Pair counts and mean whitespace-token lengths per split.
pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    DatasetStats {
        name: d.name.clone(),
        train: split_stats(&d.train),
        test: split_stats(&d.test),
    }
}

/// Seeded uniform sample of `size` records, kept in original order. Used to
/// cut a fixed-size evaluation subset out of a larger release.
pub fn sample_subset(records: &[PairRecord], size: usize, seed: u64) -> Result<Vec<PairRecord>> {
    if size > records.len() {
        return Err(Error::invalid(format!(
            "cannot sample {size} records from {}",
            records.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, records.len(), size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<PairRecord>> {
        parse_split(text.as_bytes(), Language::Python)
    }

    #[test]
    fn parses_in_file_order_with_numeric_ids() {
        let recs = parse(
            "{\"id\": 11, \"query\": \"add\", \"code\": \"a+b\"}\n\
             {\"id\": \"x\", \"query\": \"sub\", \"code\": \"a-b\"}\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "11");
        assert_eq!(recs[1].query, "sub");
    }

    #[test]
    fn empty_file_has_no_records() {
        assert!(matches!(parse(""), Err(Error::NoRecords)));
        assert_eq!(parse("\n\n").unwrap_err().to_string(), "no records");
    }

    #[test]
    fn duplicate_id_names_both_lines() {
        let mut text = String::new();
        for i in 1..=7 {
            let id = if i == 3 || i == 7 { "dup".to_string() } else { format!("p{i}") };
            text.push_str(&format!("{{\"id\":\"{id}\",\"query\":\"q\",\"code\":\"c\"}}\n"));
        }
        match parse(&text) {
            Err(Error::DuplicateId { id, first, second }) => {
                assert_eq!((id.as_str(), first, second), ("dup", 3, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"id\":\"a\",\"query\":\"q\",\"code\":\"c\"}\nnot json\n";
        assert!(matches!(parse(text), Err(Error::MalformedLine { line: 2, .. })));
        let extra = "{\"id\":\"a\",\"query\":\"q\",\"code\":\"c\",\"lang\":\"py\"}\n";
        assert!(matches!(parse(extra), Err(Error::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn empty_field_rejected() {
        let text = "{\"id\":\"a\",\"query\":\"  \",\"code\":\"c\"}\n";
        assert!(matches!(parse(text), Err(Error::EmptyField { line: 1, field: "query" })));
    }

    #[test]
    fn split_collision_rejected() {
        let a = PairRecord::new("a", "q", "c", Language::Python);
        let err = Dataset::new("d", Language::Python, vec![a.clone()], vec![a]).unwrap_err();
        assert!(matches!(err, Error::SplitCollision(_)));
    }

    #[test]
    fn stats_count_split_lengths() {
        let train = vec![
            PairRecord::new("a", "sum two numbers", "a + b", Language::Python),
            PairRecord::new("b", "negate", "-a", Language::Python),
        ];
        let d = Dataset::new("tiny", Language::Python, train, vec![]).unwrap();
        let s = dataset_stats(&d);
        assert_eq!((s.train.count, s.test.count), (2, 0));
        assert_eq!(s.train.mean_query_tokens, 2.0);
        assert_eq!(s.test.mean_code_tokens, 0.0);
    }

    #[test]
    fn subset_is_seeded_and_ordered() {
        let recs: Vec<_> = (0..50)
            .map(|i| PairRecord::new(format!("p{i}"), "q", "c", Language::Python))
            .collect();
        let a = sample_subset(&recs, 10, 42).unwrap();
        let b = sample_subset(&recs, 10, 42).unwrap();
        assert_eq!(a, b);
        let idx: Vec<usize> = a.iter().map(|r| r.id[1..].parse().unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, sample_subset(&recs, 10, 43).unwrap());
        assert!(sample_subset(&recs, 51, 0).is_err());
    }
}
