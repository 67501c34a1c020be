//! Dense retrieval over vectors from an external embedding service.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::top_k;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps raw values without normalizing. Entries must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Embedding(format!("non-finite entry {bad}")));
        }
        Ok(EmbeddingVector(values))
    }

    /// Scales to unit L2 norm. A zero vector is left as is.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let mut v = Self::new(values)?;
        let norm = v.norm();
        if norm > 0.0 {
            v.0.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        EmbeddingVector(self.0.iter().map(|x| x * alpha).collect())
    }
}

fn check_dim(expected: usize, v: &EmbeddingVector) -> Result<()> {
    if v.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.dim(),
        });
    }
    Ok(())
}

/// Dot product.
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dim(a.dim(), b)?;
    Ok(dot(a.values(), b.values()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Average pooling of the original vector (weighted by N) with N generation
/// vectors: `(N * v + sum(gens)) / 2N`. The result is not re-normalized.
pub fn augment_representation(v: &EmbeddingVector, gens: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    if gens.is_empty() {
        return Err(Error::invalid("augmented representation needs at least one generation"));
    }
    let n = gens.len() as f64;
    let mut acc: Vec<f64> = v.values().iter().map(|x| x * n).collect();
    for g in gens {
        check_dim(v.dim(), g)?;
        acc.iter_mut().zip(g.values()).for_each(|(a, x)| *a += x);
    }
    acc.iter_mut().for_each(|a| *a /= 2.0 * n);
    EmbeddingVector::new(acc)
}

/// Plain mean of generation vectors, used when the originals are dropped.
pub fn mean_representation(gens: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = gens
        .first()
        .ok_or_else(|| Error::invalid("mean of zero vectors"))?;
    let mut acc = vec![0.0; first.dim()];
    for g in gens {
        check_dim(first.dim(), g)?;
        acc.iter_mut().zip(g.values()).for_each(|(a, x)| *a += x);
    }
    let n = gens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    EmbeddingVector::new(acc)
}

/// Mean in-batch contrastive loss. Pair `i`'s code is the positive for query
/// `i`; every other code in the batch is a negative.
pub fn infonce_loss(pairs: &[(EmbeddingVector, EmbeddingVector)]) -> Result<f64> {
    let Some((q0, _)) = pairs.first() else {
        return Err(Error::invalid("InfoNCE needs at least one pair"));
    };
    let dim = q0.dim();
    for (q, c) in pairs {
        check_dim(dim, q)?;
        check_dim(dim, c)?;
    }
    let mut total = 0.0;
    for (i, (q, _)) in pairs.iter().enumerate() {
        let logits: Vec<f64> = pairs.iter().map(|(_, c)| dot(q.values(), c.values())).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += lse - logits[i];
    }
    Ok(total / pairs.len() as f64)
}

/// Source of raw embeddings.
pub trait Embedder: Send + Sync {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
    dim: usize,
}

/// Client for `POST <base>/embed`.
pub struct HttpEmbedder {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| Error::Embedding(e.to_string()))?;
        Ok(HttpEmbedder {
            base_url: base_url.into(),
            client,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embed", self.base_url.trim_end_matches('/'));
        let resp = self
            .client
            .post(url)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| Error::Embedding(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| Error::Embedding(e.to_string()))?;
        if !status.is_success() {
            return Err(Error::Embedding(format!("HTTP {}: {body}", status.as_u16())));
        }
        let parsed: EmbedResponse =
            serde_json::from_str(&body).map_err(|e| Error::Embedding(format!("bad response: {e}")))?;
        if let Some(v) = parsed.embeddings.iter().find(|v| v.len() != parsed.dim) {
            return Err(Error::DimensionMismatch {
                expected: parsed.dim,
                found: v.len(),
            });
        }
        Ok(parsed.embeddings)
    }
}

/// Embeds `texts` in batches and re-normalizes each vector to unit length.
pub fn embed(texts: &[String], embedder: &dyn Embedder, batch_size: usize) -> Result<Vec<EmbeddingVector>> {
    let mut out = Vec::with_capacity(texts.len());
    let mut dim = None;
    for chunk in texts.chunks(batch_size.max(1)) {
        let raw = embedder.embed_raw(chunk)?;
        if raw.len() != chunk.len() {
            return Err(Error::Embedding(format!(
                "sent {} texts, got {} vectors",
                chunk.len(),
                raw.len()
            )));
        }
        for values in raw {
            let d = *dim.get_or_insert(values.len());
            if values.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: values.len(),
                });
            }
            out.push(EmbeddingVector::normalized(values)?);
        }
    }
    Ok(out)
}

/// Exact-scan vector index; rows are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    doc_ids: Vec<String>,
    dim: usize,
    rows: Vec<f64>,
}

impl DenseIndex {
    pub fn build(doc_ids: Vec<String>, vectors: &[EmbeddingVector]) -> Result<Self> {
        if doc_ids.len() != vectors.len() {
            return Err(Error::invalid("one vector per document required"));
        }
        let first = vectors.first().ok_or(Error::EmptyCorpus)?;
        let dim = first.dim();
        let mut rows = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            check_dim(dim, v)?;
            rows.extend_from_slice(v.values());
        }
        Ok(DenseIndex { doc_ids, dim, rows })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn score_all(&self, v: &EmbeddingVector) -> Result<Vec<f64>> {
        check_dim(self.dim, v)?;
        Ok(self.rows.chunks_exact(self.dim).map(|row| dot(row, v.values())).collect())
    }

    /// Best `topk` documents by dot product; ties go to the lower document number.
    pub fn search(&self, v: &EmbeddingVector, topk: usize) -> Result<Vec<(String, f64)>> {
        let scores = self.score_all(v)?;
        Ok(top_k(&scores, (0..self.len()).collect(), topk)
            .into_iter()
            .map(|d| (self.doc_ids[d].clone(), scores[d]))
            .collect())
    }

    /// Writes `count: u32, dim: u32` then row-major `f32` values, all
    /// little-endian, to `path`; document ids go to `path` + `.ids`, one per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(8 + self.rows.len() * 4);
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in &self.rows {
            buf.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(path, e))?;
        let ids_path = ids_path(path);
        std::fs::write(&ids_path, self.doc_ids.join("\n") + "\n").map_err(|e| Error::io(ids_path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 8 {
            return Err(Error::IndexFormat("truncated header".into()));
        }
        let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if bytes.len() != 8 + count * dim * 4 {
            return Err(Error::IndexFormat(format!(
                "expected {} payload bytes for {count}x{dim}, found {}",
                count * dim * 4,
                bytes.len() - 8
            )));
        }
        let rows = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let ids_path = ids_path(path);
        let doc_ids: Vec<String> = std::fs::read_to_string(&ids_path)
            .map_err(|e| Error::io(ids_path, e))?
            .lines()
            .map(str::to_string)
            .collect();
        if doc_ids.len() != count {
            return Err(Error::IndexFormat(format!("{count} vectors but {} ids", doc_ids.len())));
        }
        Ok(DenseIndex { doc_ids, dim, rows })
    }
}

fn ids_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ids");
    p.into()
}
