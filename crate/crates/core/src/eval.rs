//! Retrieval evaluation: MRR over a dataset's test split, generation-count
//! sweeps, best-exemplar selection and the metric-vs-MRR delta analysis.
//!
//! The candidate codebase is every code in the test split; each test query
//! is scored against all of them and the rank of its own code is recorded.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::corpus::{AugKind, AugmentationStore, Dataset};
use crate::dense::{augment_representation, embed, mean_representation, DenseIndex, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::sparse::{build_augmented_code, build_augmented_query, index_corpus, Bm25Params, TokenizerOptions};
use crate::style::{metric_score, MetricKind, StyleIdf};

/// Mean reciprocal rank.
pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("mrr of an empty rank list"));
    }
    if ranks.contains(&0) {
        return Err(Error::invalid("ranks start at 1"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Rank of `scores[target]` with ties placed before it (pessimistic) and
/// after it (optimistic).
pub fn rank_of(scores: &[f64], target: usize) -> (usize, usize) {
    let s = scores[target];
    let mut ge = 0;
    let mut gt = 0;
    for (j, &v) in scores.iter().enumerate() {
        if j == target {
            continue;
        }
        if v >= s {
            ge += 1;
        }
        if v > s {
            gt += 1;
        }
    }
    (1 + ge, 1 + gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Baseline,
    Gar,
    Reco,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retriever {
    Sparse,
    Dense,
}

macro_rules! name_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::invalid(format!(
                        concat!("unknown ", stringify!($ty), " '{}' (expected ", $($name, " "),+, ")"),
                        other
                    ))),
                }
            }
        }
    };
}

name_enum!(Framework { Baseline => "baseline", Gar => "gar", Reco => "reco" });
name_enum!(Retriever { Sparse => "sparse", Dense => "dense" });

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub framework: Framework,
    pub retriever: Retriever,
    /// Generations appended per side.
    pub n_gen: usize,
    /// Model tag the augmentations were stored under.
    pub model: String,
    /// Match exemplars against rewrites, dropping the original texts.
    pub llm_only: bool,
}

impl PipelineConfig {
    pub fn baseline(retriever: Retriever) -> Self {
        PipelineConfig {
            framework: Framework::Baseline,
            retriever,
            n_gen: 0,
            model: String::new(),
            llm_only: false,
        }
    }

    pub fn gar(retriever: Retriever, n_gen: usize, model: impl Into<String>) -> Self {
        PipelineConfig {
            framework: Framework::Gar,
            retriever,
            n_gen,
            model: model.into(),
            llm_only: false,
        }
    }

    pub fn reco(retriever: Retriever, n_gen: usize, model: impl Into<String>) -> Self {
        PipelineConfig {
            framework: Framework::Reco,
            retriever,
            n_gen,
            model: model.into(),
            llm_only: false,
        }
    }

    pub fn llm_only(mut self) -> Self {
        self.llm_only = true;
        self
    }

    pub fn with_n_gen(mut self, n_gen: usize) -> Self {
        self.n_gen = n_gen;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.framework {
            Framework::Baseline if self.n_gen != 0 => {
                return Err(Error::Config("baseline uses no generations; n_gen must be 0".into()))
            }
            Framework::Gar | Framework::Reco if self.n_gen == 0 => {
                return Err(Error::Config(format!("{} needs n_gen >= 1", self.framework)))
            }
            Framework::Gar | Framework::Reco if self.model.is_empty() => {
                return Err(Error::Config(format!("{} needs a model tag", self.framework)))
            }
            _ => {}
        }
        if self.llm_only && self.framework != Framework::Reco {
            return Err(Error::Config("llm_only is only valid with the reco framework".into()));
        }
        Ok(())
    }

    fn query_gens(&self) -> usize {
        match self.framework {
            Framework::Baseline => 0,
            _ => self.n_gen,
        }
    }

    fn code_gens(&self) -> usize {
        match self.framework {
            Framework::Reco => self.n_gen,
            _ => 0,
        }
    }

    /// Short label such as `reco/sparse/n=4/gpt-3.5`.
    pub fn label(&self) -> String {
        let mut s = format!("{}/{}", self.framework, self.retriever);
        if self.framework != Framework::Baseline {
            let _ = write!(s, "/n={}/{}", self.n_gen, self.model);
        }
        if self.llm_only {
            s.push_str("/llm-only");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub dataset: String,
    pub config: PipelineConfig,
    pub ids: Vec<String>,
    /// Rank of each query's code, counting tied competitors as ahead.
    pub ranks: Vec<usize>,
    /// Same, counting tied competitors as behind.
    pub optimistic_ranks: Vec<usize>,
    pub mrr: f64,
    pub mrr_optimistic: f64,
    /// Generations used that hit the output-token limit.
    pub truncated_generations: usize,
}

/// Query- and code-side texts for one run, aligned with the test split.
struct Sides {
    queries: Vec<String>,
    query_gens: Vec<Vec<String>>,
    codes: Vec<String>,
    code_gens: Vec<Vec<String>>,
    truncated: usize,
}

/// Runs evaluations against one augmentation store.
pub struct Harness<'a> {
    store: &'a AugmentationStore,
    bm25: Bm25Params,
    tokenizer: TokenizerOptions,
    embedder: Option<&'a dyn Embedder>,
    embed_batch: usize,
    embeddings: Mutex<HashMap<String, EmbeddingVector>>,
}

impl<'a> Harness<'a> {
    pub fn new(store: &'a AugmentationStore) -> Self {
        Harness {
            store,
            bm25: Bm25Params::default(),
            tokenizer: TokenizerOptions::default(),
            embedder: None,
            embed_batch: 64,
            embeddings: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_bm25(mut self, params: Bm25Params, tokenizer: TokenizerOptions) -> Self {
        self.bm25 = params;
        self.tokenizer = tokenizer;
        self
    }

    pub fn with_embedder(mut self, embedder: &'a dyn Embedder, batch_size: usize) -> Self {
        self.embedder = Some(embedder);
        self.embed_batch = batch_size;
        self
    }

    pub fn store(&self) -> &AugmentationStore {
        self.store
    }

    fn gather(&self, dataset: &Dataset, kind: AugKind, model: &str, n: usize) -> Result<(Vec<Vec<String>>, usize)> {
        if n == 0 {
            return Ok((vec![Vec::new(); dataset.test.len()], 0));
        }
        let mut out = Vec::with_capacity(dataset.test.len());
        let mut missing = Vec::new();
        let mut truncated = 0;
        for r in &dataset.test {
            let recs = self.store.records(&r.id, kind, model);
            let prefix: Vec<_> = recs.iter().enumerate().take_while(|(i, x)| x.index as usize == *i).take(n).collect();
            if prefix.len() < n {
                missing.push(r.id.clone());
                continue;
            }
            truncated += prefix.iter().filter(|(_, x)| x.truncated).count();
            out.push(prefix.into_iter().map(|(_, x)| x.text.clone()).collect());
        }
        if !missing.is_empty() {
            return Err(Error::MissingAugmentation { kind, ids: missing });
        }
        Ok((out, truncated))
    }

    fn sides(&self, dataset: &Dataset, cfg: &PipelineConfig) -> Result<Sides> {
        let (query_gens, tq) = self.gather(dataset, AugKind::Exemplar, &cfg.model, cfg.query_gens())?;
        let (code_gens, tc) = self.gather(dataset, AugKind::Rewrite, &cfg.model, cfg.code_gens())?;
        Ok(Sides {
            queries: dataset.test.iter().map(|r| r.query.clone()).collect(),
            query_gens,
            codes: dataset.test.iter().map(|r| r.code.clone()).collect(),
            code_gens,
            truncated: tq + tc,
        })
    }

    /// Scores every test query against the whole codebase and ranks its code.
    pub fn run_eval(&self, dataset: &Dataset, cfg: &PipelineConfig) -> Result<EvalResult> {
        cfg.validate()?;
        if dataset.test.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let sides = self.sides(dataset, cfg)?;
        let scores = match cfg.retriever {
            Retriever::Sparse => self.sparse_scores(dataset, &sides, cfg.llm_only)?,
            Retriever::Dense => self.dense_scores(&sides, cfg.llm_only)?,
        };
        let (ranks, optimistic_ranks): (Vec<usize>, Vec<usize>) =
            scores.iter().enumerate().map(|(i, s)| rank_of(s, i)).unzip();
        Ok(EvalResult {
            dataset: dataset.name.clone(),
            config: cfg.clone(),
            ids: dataset.test.iter().map(|r| r.id.clone()).collect(),
            mrr: mrr(&ranks)?,
            mrr_optimistic: mrr(&optimistic_ranks)?,
            ranks,
            optimistic_ranks,
            truncated_generations: sides.truncated,
        })
    }

    /// Exemplars against rewrites with the original query and code left out.
    pub fn llm_only_eval(&self, dataset: &Dataset, cfg: &PipelineConfig) -> Result<EvalResult> {
        self.run_eval(dataset, &cfg.clone().llm_only())
    }

    fn sparse_scores(&self, dataset: &Dataset, sides: &Sides, llm_only: bool) -> Result<Vec<Vec<f64>>> {
        let docs: Vec<_> = dataset
            .test
            .iter()
            .zip(sides.codes.iter().zip(&sides.code_gens))
            .map(|(r, (code, gens))| {
                if llm_only {
                    build_augmented_code(&r.id, &gens.join("\n"), &[] as &[&str])
                } else {
                    build_augmented_code(&r.id, code, gens)
                }
            })
            .collect();
        let index = index_corpus(&docs, self.bm25, self.tokenizer)?;
        Ok(sides
            .queries
            .par_iter()
            .zip(&sides.query_gens)
            .map(|(q, gens)| {
                let text = if llm_only {
                    gens.join("\n")
                } else {
                    build_augmented_query("", q, gens).text
                };
                index.score_all(&text)
            })
            .collect())
    }

    /// Embeds texts not seen before and returns vectors for all of them.
    fn vectors(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let embedder = self
            .embedder
            .ok_or_else(|| Error::Config("dense retrieval needs an embedding service (embed.base_url)".into()))?;
        let mut cache = self.embeddings.lock().unwrap_or_else(|e| e.into_inner());
        let mut todo: Vec<String> = texts.iter().filter(|t| !cache.contains_key(*t)).cloned().collect();
        todo.sort();
        todo.dedup();
        if !todo.is_empty() {
            let fresh = embed(&todo, embedder, self.embed_batch)?;
            cache.extend(todo.into_iter().zip(fresh));
        }
        Ok(texts.iter().map(|t| cache[t].clone()).collect())
    }

    fn side_vectors(&self, originals: &[String], gens: &[Vec<String>], llm_only: bool) -> Result<Vec<EmbeddingVector>> {
        let orig = self.vectors(originals)?;
        let flat: Vec<String> = gens.iter().flatten().cloned().collect();
        let flat_vecs = self.vectors(&flat)?;
        let mut pos = 0;
        let mut out = Vec::with_capacity(orig.len());
        for (v, g) in orig.iter().zip(gens) {
            let gv = &flat_vecs[pos..pos + g.len()];
            pos += g.len();
            out.push(if llm_only {
                mean_representation(gv)?
            } else if g.is_empty() {
                v.clone()
            } else {
                augment_representation(v, gv)?
            });
        }
        Ok(out)
    }

    fn dense_scores(&self, sides: &Sides, llm_only: bool) -> Result<Vec<Vec<f64>>> {
        let qv = self.side_vectors(&sides.queries, &sides.query_gens, llm_only)?;
        let cv = self.side_vectors(&sides.codes, &sides.code_gens, llm_only)?;
        let ids = (0..cv.len()).map(|i| i.to_string()).collect();
        let index = DenseIndex::build(ids, &cv)?;
        qv.par_iter().map(|v| index.score_all(v)).collect()
    }

    /// Evaluates `n = 1..=max_n` on prefixes of the stored generations.
    pub fn gen_count_sweep(&self, dataset: &Dataset, cfg: &PipelineConfig, max_n: usize) -> Result<Vec<(usize, EvalResult)>> {
        if max_n == 0 {
            return Err(Error::invalid("max_n must be at least 1"));
        }
        cfg.clone().with_n_gen(max_n).validate()?;
        let mut kinds = vec![AugKind::Exemplar];
        if cfg.framework == Framework::Reco {
            kinds.push(AugKind::Rewrite);
        }
        for kind in kinds {
            let short: Vec<(String, usize)> = dataset
                .test
                .iter()
                .map(|r| (r.id.clone(), self.store.available(&r.id, kind, &cfg.model)))
                .filter(|(_, have)| *have < max_n)
                .collect();
            if !short.is_empty() {
                return Err(Error::GenerationShortfall {
                    kind,
                    needed: max_n,
                    short,
                });
            }
        }
        (1..=max_n)
            .map(|n| Ok((n, self.run_eval(dataset, &cfg.clone().with_n_gen(n))?)))
            .collect()
    }

    /// Runs every framework/model/n combination.
    pub fn grid(&self, dataset: &Dataset, retriever: Retriever, models: &[String], ns: &[usize]) -> Result<Vec<EvalResult>> {
        let mut out = vec![self.run_eval(dataset, &PipelineConfig::baseline(retriever))?];
        for model in models {
            for &n in ns {
                out.push(self.run_eval(dataset, &PipelineConfig::gar(retriever, n, model.clone()))?);
                out.push(self.run_eval(dataset, &PipelineConfig::reco(retriever, n, model.clone()))?);
            }
        }
        Ok(out)
    }

    /// Compares retrieval with the exemplar closest to the true code against
    /// a uniformly random exemplar, one exemplar per query.
    pub fn best_vs_random(&self, dataset: &Dataset, sel: &SelectionConfig, idf: &StyleIdf) -> Result<SelectionResult> {
        if sel.candidates == 0 {
            return Err(Error::invalid("need at least one candidate exemplar"));
        }
        let (pool, _) = self.gather(dataset, AugKind::Exemplar, &sel.model, sel.candidates)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sel.seed);
        let random: Vec<usize> = pool.iter().map(|_| rng.gen_range(0..sel.candidates)).collect();
        let best: Vec<usize> = pool
            .par_iter()
            .zip(&dataset.test)
            .map(|(ex, r)| select_best_exemplar(ex, &r.code, sel.metric, dataset.language, idf))
            .collect::<Result<_>>()?;
        let score_of = |picks: &[usize]| -> Result<f64> {
            let vals: Vec<f64> = pool
                .par_iter()
                .zip(&dataset.test)
                .zip(picks)
                .map(|((ex, r), &k)| Ok(metric_score(sel.metric, &ex[k], &r.code, dataset.language, idf)?.value))
                .collect::<Result<_>>()?;
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let cfg = PipelineConfig::gar(sel.retriever, 1, sel.model.clone());
        let run = |picks: &[usize]| -> Result<EvalResult> {
            let sides = Sides {
                queries: dataset.test.iter().map(|r| r.query.clone()).collect(),
                query_gens: pool.iter().zip(picks).map(|(ex, &k)| vec![ex[k].clone()]).collect(),
                codes: dataset.test.iter().map(|r| r.code.clone()).collect(),
                code_gens: vec![Vec::new(); dataset.test.len()],
                truncated: 0,
            };
            let scores = match sel.retriever {
                Retriever::Sparse => self.sparse_scores(dataset, &sides, false)?,
                Retriever::Dense => self.dense_scores(&sides, false)?,
            };
            let (ranks, opt): (Vec<usize>, Vec<usize>) = scores.iter().enumerate().map(|(i, s)| rank_of(s, i)).unzip();
            Ok(EvalResult {
                dataset: dataset.name.clone(),
                config: cfg.clone(),
                ids: dataset.test.iter().map(|r| r.id.clone()).collect(),
                mrr: mrr(&ranks)?,
                mrr_optimistic: mrr(&opt)?,
                ranks,
                optimistic_ranks: opt,
                truncated_generations: 0,
            })
        };
        let best_run = run(&best)?;
        let random_run = run(&random)?;
        Ok(SelectionResult {
            dataset: dataset.name.clone(),
            model: sel.model.clone(),
            metric: sel.metric,
            metric_best: score_of(&best)?,
            metric_random: score_of(&random)?,
            mrr_best: best_run.mrr,
            mrr_random: random_run.mrr,
            best_picks: best,
            random_picks: random,
        })
    }
}

/// Index of the exemplar scoring highest against `truth`; the first one wins ties.
pub fn select_best_exemplar<S: AsRef<str>>(
    exemplars: &[S],
    truth: &str,
    metric: MetricKind,
    language: crate::corpus::Language,
    idf: &StyleIdf,
) -> Result<usize> {
    if exemplars.is_empty() {
        return Err(Error::invalid("no exemplars to select from"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, e) in exemplars.iter().enumerate() {
        let v = metric_score(metric, e.as_ref(), truth, language, idf)?.value;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub retriever: Retriever,
    pub model: String,
    /// Stored exemplars considered per query.
    pub candidates: usize,
    pub metric: MetricKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub dataset: String,
    pub model: String,
    pub metric: MetricKind,
    /// Mean metric value of the chosen exemplars against the true code.
    pub metric_best: f64,
    pub metric_random: f64,
    pub mrr_best: f64,
    pub mrr_random: f64,
    pub best_picks: Vec<usize>,
    pub random_picks: Vec<usize>,
}

impl SelectionResult {
    pub fn delta_point(&self) -> DeltaPoint {
        DeltaPoint {
            dataset: self.dataset.clone(),
            model: self.model.clone(),
            metric: self.metric,
            delta_metric: self.metric_best - self.metric_random,
            delta_mrr: self.mrr_best - self.mrr_random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub dataset: String,
    pub model: String,
    pub metric: MetricKind,
    pub delta_metric: f64,
    pub delta_mrr: f64,
}

/// Quadrant tallies with the metric delta on x and the MRR delta on y.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DeltaSummary {
    pub points: usize,
    /// Quadrants I to IV.
    pub quadrants: [usize; 4],
    /// Points with either coordinate exactly zero.
    pub on_axis: usize,
    /// Least-squares fit `y = slope * x + intercept`; absent with fewer than
    /// two points or no spread in x.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

pub fn delta_analysis(points: &[DeltaPoint]) -> Result<DeltaSummary> {
    let mut s = DeltaSummary {
        points: points.len(),
        ..Default::default()
    };
    for p in points {
        let (x, y) = (p.delta_metric, p.delta_mrr);
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!("non-finite delta point for {}/{}", p.dataset, p.model)));
        }
        let q = match (x.partial_cmp(&0.0), y.partial_cmp(&0.0)) {
            (Some(std::cmp::Ordering::Greater), Some(std::cmp::Ordering::Greater)) => Some(0),
            (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Greater)) => Some(1),
            (Some(std::cmp::Ordering::Less), Some(std::cmp::Ordering::Less)) => Some(2),
            (Some(std::cmp::Ordering::Greater), Some(std::cmp::Ordering::Less)) => Some(3),
            _ => None,
        };
        match q {
            Some(i) => s.quadrants[i] += 1,
            None => s.on_axis += 1,
        }
    }
    if points.len() >= 2 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.delta_metric).sum::<f64>() / n;
        let my = points.iter().map(|p| p.delta_mrr).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.delta_metric - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.delta_metric - mx) * (p.delta_mrr - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            s.slope = Some(slope);
            s.intercept = Some(my - slope * mx);
        }
    }
    Ok(s)
}

/// The grid cell with the highest MRR, first one on ties.
pub fn best_cell(results: &[EvalResult]) -> Option<&EvalResult> {
    results.iter().fold(None, |best: Option<&EvalResult>, r| match best {
        Some(b) if b.mrr >= r.mrr => Some(b),
        _ => Some(r),
    })
}

/// Plain-text table of MRR (in percent) per configuration.
pub fn render_table(results: &[EvalResult]) -> String {
    let width = results.iter().map(|r| r.config.label().len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<12} {:<width$} {:>8} {:>8} {:>9}\n", "dataset", "config", "MRR", "MRR-opt", "truncated");
    for r in results {
        let _ = writeln!(
            out,
            "{:<12} {:<width$} {:>8.2} {:>8.2} {:>9}",
            r.dataset,
            r.config.label(),
            r.mrr * 100.0,
            r.mrr_optimistic * 100.0,
            r.truncated_generations
        );
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
