//! LLM augmentation: exemplar codes for queries, and summarize-then-generate
//! rewrites for codebase entries.
//!
//! Every completion goes through the content-addressed [`LlmCache`] and every
//! output is persisted to the [`AugmentationStore`], so an interrupted job can
//! be resumed and a finished one replayed without touching the endpoint.

mod llm;
mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use llm::{
    trim_completion, Completion, CompletionRequest, HttpLlm, LanguageModel, LlmEndpoint, MockLlm,
    MockPersonality, RateLimiter, RetryPolicy,
};
pub use prompt::{
    build_gen_prompt, build_sum_prompt, gen_instruction, sum_instruction, PromptKind,
    PromptTemplate, Shot,
};

use crate::corpus::{AugKind, AugmentationRecord, AugmentationStore, CacheKey, Language, LlmCache, PairRecord};
use crate::error::{Error, LlmError, Result, Stage};

/// Draws `k` distinct training pairs as in-context shots, in sampled order.
pub fn sample_shots<R: Rng + ?Sized>(train: &[PairRecord], k: usize, rng: &mut R) -> Result<Vec<Shot>> {
    if train.len() < k {
        return Err(Error::invalid(format!(
            "need {k} in-context examples but the training split has {}",
            train.len()
        )));
    }
    Ok(rand::seq::index::sample(rng, train.len(), k)
        .into_iter()
        .map(|i| Shot {
            description: train[i].query.clone(),
            code: train[i].code.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens_gen: u32,
    pub max_tokens_sum: u32,
    pub k_shots: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 1.0,
            max_tokens_gen: 256,
            max_tokens_sum: 128,
            k_shots: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationBatch {
    pub source_id: String,
    pub kind: AugKind,
    pub outputs: Vec<String>,
    pub truncated: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct CachedCompletion {
    text: String,
    #[serde(default)]
    truncated: bool,
}

/// Drives one model over one dataset's training shots.
pub struct Augmentor<'a> {
    llm: &'a dyn LanguageModel,
    cache: &'a LlmCache,
    store: &'a AugmentationStore,
    train: &'a [PairRecord],
    language: Language,
    params: GenerationParams,
    retry: RetryPolicy,
    limiter: RateLimiter,
    endpoint_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl<'a> Augmentor<'a> {
    pub fn new(
        llm: &'a dyn LanguageModel,
        cache: &'a LlmCache,
        store: &'a AugmentationStore,
        train: &'a [PairRecord],
        language: Language,
    ) -> Self {
        Augmentor {
            llm,
            cache,
            store,
            train,
            language,
            params: GenerationParams::default(),
            retry: RetryPolicy::default(),
            limiter: RateLimiter::unlimited(),
            endpoint_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, per_second: f64) -> Self {
        self.limiter = RateLimiter::new(per_second);
        self
    }

    pub fn model(&self) -> &str {
        self.llm.model()
    }

    /// Number of requests that actually reached the endpoint.
    pub fn endpoint_calls(&self) -> usize {
        self.endpoint_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    fn complete(&self, prompt: &PromptTemplate, max_tokens: u32, sample_index: u32, stage: Stage) -> Result<Completion> {
        let key = CacheKey::new(&prompt.render(), self.llm.model(), self.params.temperature, sample_index);
        if let Some(raw) = self.cache.lookup(&key) {
            if let Ok(c) = serde_json::from_str::<CachedCompletion>(&raw) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(Completion {
                    text: c.text,
                    truncated: c.truncated,
                });
            }
        }
        let req = CompletionRequest {
            prompt,
            temperature: self.params.temperature,
            max_tokens,
            sample_index,
        };
        let completion = self
            .retry
            .run(|| {
                self.limiter.acquire();
                self.endpoint_calls.fetch_add(1, Ordering::Relaxed);
                self.llm.complete(&req)
            })
            .map_err(|source| Error::Llm { stage, source })?;
        let text = trim_completion(&completion.text);
        if text.is_empty() {
            return Err(Error::Llm {
                stage,
                source: LlmError::EmptyCompletion,
            });
        }
        if completion.truncated {
            log::warn!("{} completion hit the {max_tokens}-token limit", self.llm.model());
        }
        let cached = serde_json::to_string(&CachedCompletion {
            text: text.clone(),
            truncated: completion.truncated,
        })
        .expect("completion serializes");
        self.cache.store(&key, &cached)?;
        Ok(Completion {
            text,
            truncated: completion.truncated,
        })
    }

    fn persist(&self, source_id: &str, kind: AugKind, index: u32, c: &Completion) -> Result<()> {
        self.store.insert(AugmentationRecord {
            source_id: source_id.to_string(),
            kind,
            index,
            model: self.llm.model().to_string(),
            text: c.text.clone(),
            truncated: c.truncated,
        })?;
        Ok(())
    }

    fn generate_from(
        &self,
        source_id: &str,
        description: &str,
        n: usize,
        kind: AugKind,
        rng: &mut dyn rand::RngCore,
    ) -> Result<GenerationBatch> {
        if n == 0 {
            return Err(Error::invalid("number of generations must be >= 1"));
        }
        let mut outputs = Vec::with_capacity(n);
        let mut truncated = Vec::with_capacity(n);
        for i in 0..n {
            // Fresh shots for every sample.
            let shots = sample_shots(self.train, self.params.k_shots, rng)?;
            let prompt = build_gen_prompt(description, &shots, self.language)?;
            let c = self.complete(&prompt, self.params.max_tokens_gen, i as u32, Stage::Generate)?;
            self.persist(source_id, kind, i as u32, &c)?;
            outputs.push(c.text);
            truncated.push(c.truncated);
        }
        Ok(GenerationBatch {
            source_id: source_id.to_string(),
            kind,
            outputs,
            truncated,
        })
    }

    /// `n` exemplar codes for a query.
    pub fn generate_exemplars(
        &self,
        source_id: &str,
        query: &str,
        n: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<GenerationBatch> {
        if query.trim().is_empty() {
            return Err(Error::invalid("query is empty"));
        }
        self.generate_from(source_id, query, n, AugKind::Exemplar, rng)
    }

    /// One-sentence purpose of a code snippet.
    pub fn summarize_code(&self, source_id: &str, code: &str, rng: &mut dyn rand::RngCore) -> Result<String> {
        if code.trim().is_empty() {
            return Err(Error::invalid("code to summarize is empty"));
        }
        let shots = sample_shots(self.train, self.params.k_shots, rng)?;
        let prompt = build_sum_prompt(code, &shots, self.language)?;
        let c = self.complete(&prompt, self.params.max_tokens_sum, 0, Stage::Summarize)?;
        self.persist(source_id, AugKind::Summary, 0, &c)?;
        Ok(c.text)
    }

    /// Summarizes once, then generates `n` rewrites from that summary.
    pub fn rewrite_code(
        &self,
        source_id: &str,
        code: &str,
        n: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<GenerationBatch> {
        if n == 0 {
            return Err(Error::invalid("number of generations must be >= 1"));
        }
        let summary = self.summarize_code(source_id, code, rng)?;
        self.generate_from(source_id, &summary, n, AugKind::Rewrite, rng)
    }

    /// Runs a job over every pair with `concurrency` workers. Each pair draws
    /// shots from its own RNG derived from `(seed, id, job)`, so results do not
    /// depend on scheduling.
    pub fn run_job(&self, pairs: &[PairRecord], job: AugmentJob, n: usize, seed: u64, concurrency: usize) -> JobReport {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(concurrency.max(1))
            .build()
            .expect("thread pool");
        let calls_before = self.endpoint_calls();
        let hits_before = self.cache_hits();
        let failures: Vec<(String, Error)> = pool.install(|| {
            pairs
                .par_iter()
                .filter_map(|p| {
                    let mut rng = item_rng(seed, &p.id, job);
                    let r = match job {
                        AugmentJob::Exemplars => self.generate_exemplars(&p.id, &p.query, n, &mut rng).map(drop),
                        AugmentJob::Rewrites => self.rewrite_code(&p.id, &p.code, n, &mut rng).map(drop),
                    };
                    r.err().map(|e| (p.id.clone(), e))
                })
                .collect()
        });
        JobReport {
            items: pairs.len(),
            endpoint_calls: self.endpoint_calls() - calls_before,
            cache_hits: self.cache_hits() - hits_before,
            failures,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentJob {
    /// Exemplar codes for each query.
    Exemplars,
    /// Summary plus rewritten codes for each codebase entry.
    Rewrites,
}

#[derive(Debug)]
pub struct JobReport {
    pub items: usize,
    pub endpoint_calls: usize,
    pub cache_hits: usize,
    pub failures: Vec<(String, Error)>,
}

/// Deterministic per-item RNG.
pub fn item_rng(seed: u64, id: &str, job: AugmentJob) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((id.len() as u64).to_le_bytes());
    h.update(id.as_bytes());
    h.update([job as u8]);
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}
