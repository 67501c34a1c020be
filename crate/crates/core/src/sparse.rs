//! Lexical retrieval: tokenization, augmented text construction and an
//! Okapi BM25 inverted index.
//!
//! Scoring follows the Lucene variant used by Anserini/Pyserini:
//! `idf = ln(1 + (N - df + 0.5) / (df + 0.5))` and
//! `tf' = tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))`.
//! A term repeated in the query contributes once per occurrence.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TokenizerOptions {
    /// Split `snake_case` and `camelCase` identifiers into their parts.
    pub split_identifiers: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        TokenizerOptions {
            split_identifiers: true,
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, TokenizerOptions::default())
}

/// Lowercased terms. With identifier splitting on, underscores and case
/// changes are boundaries too; with it off, `_` stays inside a term.
pub fn tokenize_with(text: &str, opts: TokenizerOptions) -> Vec<String> {
    let in_word = |c: char| c.is_alphanumeric() || (!opts.split_identifiers && c == '_');
    let mut out = Vec::new();
    for word in text.split(|c: char| !in_word(c)).filter(|w| !w.is_empty()) {
        if opts.split_identifiers {
            split_camel(word, &mut out);
        } else {
            out.push(word.to_lowercase());
        }
    }
    out
}

// "parseHTTPResponse2" -> parse, http, response2
fn split_camel(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    for i in 1..chars.len() {
        let (prev, cur) = (chars[i - 1], chars[i]);
        let next_lower = chars.get(i + 1).is_some_and(|c| c.is_lowercase());
        let boundary = (prev.is_lowercase() && cur.is_uppercase())
            || (prev.is_uppercase() && cur.is_uppercase() && next_lower);
        if boundary {
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    out.push(chars[start..].iter().collect::<String>().to_lowercase());
}

/// Text after appending generations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AugmentedText {
    pub source_id: String,
    pub text: String,
    /// Number of generations appended.
    pub n: usize,
}

const JOIN: &str = "\n";

fn augment(source_id: impl Into<String>, original: &str, gens: &[impl AsRef<str>]) -> AugmentedText {
    let n = gens.len();
    let text = if n == 0 {
        original.to_string()
    } else {
        std::iter::repeat_n(original, n)
            .chain(gens.iter().map(AsRef::as_ref))
            .collect::<Vec<_>>()
            .join(JOIN)
    };
    AugmentedText {
        source_id: source_id.into(),
        text,
        n,
    }
}

/// The query repeated once per generation, followed by the generations.
/// With no generations this is the query itself.
pub fn build_augmented_query(source_id: impl Into<String>, query: &str, gens: &[impl AsRef<str>]) -> AugmentedText {
    augment(source_id, query, gens)
}

/// Code-side counterpart of [`build_augmented_query`].
pub fn build_augmented_code(source_id: impl Into<String>, code: &str, rewrites: &[impl AsRef<str>]) -> AugmentedText {
    augment(source_id, code, rewrites)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// Immutable BM25 index. Documents are numbered in insertion order and that
/// number breaks score ties.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseIndex {
    params: Bm25Params,
    tokenizer: TokenizerOptions,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    avgdl: f64,
    postings: HashMap<String, Vec<Posting>>,
}

pub fn index_corpus(docs: &[AugmentedText], params: Bm25Params, tokenizer: TokenizerOptions) -> Result<SparseIndex> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lens = Vec::with_capacity(docs.len());
    for (i, d) in docs.iter().enumerate() {
        let terms = tokenize_with(&d.text, tokenizer);
        doc_lens.push(terms.len() as u32);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in terms {
            *tf.entry(t).or_default() += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting {
                doc: i as u32,
                tf: count,
            });
        }
    }
    let total: u64 = doc_lens.iter().map(|&l| l as u64).sum();
    if total == 0 {
        return Err(Error::invalid("corpus contains no terms"));
    }
    Ok(SparseIndex {
        params,
        tokenizer,
        doc_ids: docs.iter().map(|d| d.source_id.clone()).collect(),
        avgdl: total as f64 / docs.len() as f64,
        doc_lens,
        postings,
    })
}

impl SparseIndex {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_len(&self, doc: usize) -> u32 {
        self.doc_lens[doc]
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn tokenizer(&self) -> TokenizerOptions {
        self.tokenizer
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: f64, dl: f64) -> f64 {
        let Bm25Params { k1, b } = self.params;
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avgdl))
    }

    /// BM25 score of every document, indexed by document number.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.len()];
        let mut qtf: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokenize_with(query, self.tokenizer) {
            *qtf.entry(t).or_default() += 1;
        }
        for (term, count) in qtf {
            let Some(list) = self.postings.get(&term) else { continue };
            let idf = self.idf(&term);
            for p in list {
                let w = idf * self.term_weight(p.tf as f64, self.doc_lens[p.doc as usize] as f64);
                scores[p.doc as usize] += count as f64 * w;
            }
        }
        scores
    }

    /// Documents sharing at least one term with the query, best first.
    pub fn search(&self, query: &AugmentedText, topk: usize) -> Vec<(String, f64)> {
        let scores = self.score_all(&query.text);
        let matched: Vec<bool> = {
            let mut m = vec![false; self.len()];
            for t in tokenize_with(&query.text, self.tokenizer) {
                if let Some(list) = self.postings.get(&t) {
                    for p in list {
                        m[p.doc as usize] = true;
                    }
                }
            }
            m
        };
        let candidates: Vec<usize> = (0..self.len()).filter(|&d| matched[d]).collect();
        top_k(&scores, candidates, topk)
            .into_iter()
            .map(|d| (self.doc_ids[d].clone(), scores[d]))
            .collect()
    }

    const MAGIC: &'static [u8; 8] = b"RECOBM25";
    const VERSION: u32 = 1;

    /// Writes the index as a single little-endian binary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(Self::MAGIC);
        buf.extend_from_slice(&Self::VERSION.to_le_bytes());
        buf.extend_from_slice(&self.params.k1.to_le_bytes());
        buf.extend_from_slice(&self.params.b.to_le_bytes());
        buf.push(self.tokenizer.split_identifiers as u8);
        put_u32(&mut buf, self.doc_ids.len() as u32);
        for (id, len) in self.doc_ids.iter().zip(&self.doc_lens) {
            put_str(&mut buf, id);
            put_u32(&mut buf, *len);
        }
        let terms: BTreeMap<&String, &Vec<Posting>> = self.postings.iter().collect();
        put_u32(&mut buf, terms.len() as u32);
        for (term, list) in terms {
            put_str(&mut buf, term);
            put_u32(&mut buf, list.len() as u32);
            for p in list {
                put_u32(&mut buf, p.doc);
                put_u32(&mut buf, p.tf);
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = Reader { bytes: &bytes, pos: 0 };
        if r.take(8)? != Self::MAGIC {
            return Err(Error::IndexFormat("not a sparse index file".into()));
        }
        let version = r.u32()?;
        if version != Self::VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let k1 = r.f64()?;
        let b = r.f64()?;
        let split_identifiers = r.take(1)?[0] != 0;
        let n = r.u32()? as usize;
        let mut doc_ids = Vec::with_capacity(n);
        let mut doc_lens = Vec::with_capacity(n);
        for _ in 0..n {
            doc_ids.push(r.string()?);
            doc_lens.push(r.u32()?);
        }
        let nterms = r.u32()? as usize;
        let mut postings = HashMap::with_capacity(nterms);
        for _ in 0..nterms {
            let term = r.string()?;
            let len = r.u32()? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let doc = r.u32()?;
                let tf = r.u32()?;
                if doc as usize >= n {
                    return Err(Error::IndexFormat("posting refers to unknown document".into()));
                }
                list.push(Posting { doc, tf });
            }
            postings.insert(term, list);
        }
        if r.pos != bytes.len() {
            return Err(Error::IndexFormat("trailing bytes".into()));
        }
        let total: u64 = doc_lens.iter().map(|&l| l as u64).sum();
        if n == 0 || total == 0 {
            return Err(Error::IndexFormat("empty index".into()));
        }
        Ok(SparseIndex {
            params: Bm25Params { k1, b },
            tokenizer: TokenizerOptions { split_identifiers },
            doc_ids,
            avgdl: total as f64 / n as f64,
            doc_lens,
            postings,
        })
    }
}

/// Indices of the `k` best scores, ties broken by ascending index.
pub(crate) fn top_k(scores: &[f64], mut candidates: Vec<usize>, k: usize) -> Vec<usize> {
    candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    candidates.truncate(k);
    candidates
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::IndexFormat("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::IndexFormat("invalid UTF-8".into()))
    }
}
