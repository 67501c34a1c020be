use std::path::Path;

use reco_core::augmentor::{AugmentJob, Augmentor, GenerationParams, HttpLlm, LanguageModel, LlmEndpoint, MockLlm};
use reco_core::config::KeyValues;
use reco_core::corpus::{
    dataset_stats, load_split, open_dataset_dir, sample_subset, write_dataset, AugKind, AugmentationStore, LlmCache,
};
use reco_core::dense::{augment_representation, embed, DenseIndex, HttpEmbedder};
use reco_core::eval::{
    best_cell, delta_analysis, read_jsonl, render_table, write_jsonl, DeltaPoint, EvalResult, Framework, Harness,
    PipelineConfig, Retriever, SelectionConfig, SelectionResult,
};
use reco_core::sparse::{
    build_augmented_code, build_augmented_query, index_corpus, Bm25Params, SparseIndex, TokenizerOptions,
};
use reco_core::style::{codebleu_report, cssim_with, metric_score, MetricKind, StyleIdf, StyleOptions};
use reco_core::{Config, Dataset, Error, Language, Result};
use serde_json::json;

use crate::{
    AugmentArgs, Bm25Flags, AugmentTarget, Cli, Command, DeltaArgs, EvalArgs, Global, IndexArgs, IngestArgs, MetricArgs,
    MockKind, Mode, SearchArgs, SelectArgs, SweepArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest(a) => ingest(g, a),
        Command::Augment(a) => augment(g, a),
        Command::Index(a) => index(g, a),
        Command::Search(a) => search(g, a),
        Command::Eval(a) => eval(g, a),
        Command::Sweep(a) => sweep(g, a),
        Command::SelectBest(a) => select_best(g, a),
        Command::Delta(a) => delta(a),
        Command::Metric(a) => metric(a),
    }
}

fn load_config(g: &Global, flags: &Bm25Flags) -> Result<Config> {
    let mut kv = match &g.config {
        Some(path) => KeyValues::read(path)?,
        None => KeyValues::new(),
    };
    for o in &g.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        kv.set(k.trim(), v.trim());
    }
    let mut cfg = Config::from_key_values(&kv)?;
    if let Some(k1) = flags.k1 {
        cfg.bm25_k1 = k1;
    }
    if let Some(b) = flags.b {
        cfg.bm25_b = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bm25(cfg: &Config) -> Bm25Params {
    Bm25Params {
        k1: cfg.bm25_k1,
        b: cfg.bm25_b,
    }
}

fn tokenizer(flags: &Bm25Flags) -> TokenizerOptions {
    TokenizerOptions {
        split_identifiers: !flags.no_ident_split,
    }
}

fn embedder(cfg: &Config) -> Result<HttpEmbedder> {
    let url = cfg
        .embed_base_url
        .as_deref()
        .ok_or_else(|| Error::Config("embed.base_url is not set".into()))?;
    HttpEmbedder::new(url)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(v).expect("serializable"));
}

fn ingest(g: &Global, a: IngestArgs) -> Result<()> {
    let language: Language = a.language.parse()?;
    let train = match &a.train {
        Some(p) => load_split(p, language)?,
        None => Vec::new(),
    };
    let mut test = load_split(&a.test, language)?;
    let mut manifest = KeyValues::new();
    manifest.set("source.test", a.test.display());
    if let Some(p) = &a.train {
        manifest.set("source.train", p.display());
    }
    if let Some(size) = a.subset {
        let seed = a.seed.unwrap_or(0);
        test = sample_subset(&test, size, seed)?;
        manifest.set("subset", size);
        manifest.set("seed", seed);
    }
    let dataset = Dataset::new(a.name, language, train, test)?;
    let out = a.out.as_deref().unwrap_or(&g.data);
    write_dataset(out, &dataset, &manifest)?;
    print_json(&dataset_stats(&dataset));
    Ok(())
}

fn augment(g: &Global, a: AugmentArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".into()));
    }
    let cfg = load_config(g, &Bm25Flags::default())?;
    let dataset = open_dataset_dir(&g.data)?;
    let llm: Box<dyn LanguageModel> = match a.mock {
        Some(kind) => {
            let m = match kind {
                MockKind::Echo => MockLlm::echo(&dataset.test),
                MockKind::Oracle => MockLlm::oracle(&dataset.test),
            };
            Box::new(match &a.model {
                Some(name) => m.with_model(name.clone()),
                None => m,
            })
        }
        None => {
            let base_url = cfg
                .llm_base_url
                .clone()
                .ok_or_else(|| Error::Config("llm.base_url is not set (or pass --mock)".into()))?;
            let endpoint = LlmEndpoint {
                base_url,
                model: a.model.clone().unwrap_or_else(|| cfg.llm_model.clone()),
                temperature: cfg.llm_temperature,
                max_tokens_gen: cfg.llm_max_tokens_gen,
                max_tokens_sum: cfg.llm_max_tokens_sum,
                api_key: std::env::var(&cfg.llm_api_key_env).ok(),
            };
            Box::new(HttpLlm::new(endpoint).map_err(|e| Error::Config(e.to_string()))?)
        }
    };
    let cache = LlmCache::open(&a.cache)?;
    let store = AugmentationStore::open(&g.store)?;
    let mut aug = Augmentor::new(llm.as_ref(), &cache, &store, &dataset.train, dataset.language).with_params(
        GenerationParams {
            temperature: cfg.llm_temperature,
            max_tokens_gen: cfg.llm_max_tokens_gen,
            max_tokens_sum: cfg.llm_max_tokens_sum,
            k_shots: cfg.llm_k_shots,
        },
    );
    if cfg.llm_requests_per_second > 0.0 {
        aug = aug.with_rate_limit(cfg.llm_requests_per_second);
    }
    let job = match a.target {
        AugmentTarget::Gen => AugmentJob::Exemplars,
        AugmentTarget::Rewrite => AugmentJob::Rewrites,
    };
    let report = aug.run_job(&dataset.test, job, a.n, cfg.seed, cfg.llm_concurrency);
    let failures: Vec<_> = report
        .failures
        .iter()
        .map(|(id, e)| json!({"id": id, "error": e.to_string()}))
        .collect();
    print_json(&json!({
        "dataset": dataset.name,
        "job": match job { AugmentJob::Exemplars => "gen", AugmentJob::Rewrites => "rewrite" },
        "model": aug.model(),
        "n": a.n,
        "items": report.items,
        "endpoint_calls": report.endpoint_calls,
        "cache_hits": report.cache_hits,
        "failures": failures,
    }));
    match report.failures.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

/// First `n` stored rewrites of every test code, in test order.
fn stored_rewrites(store: &AugmentationStore, dataset: &Dataset, model: &str, n: usize) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::with_capacity(dataset.test.len());
    let mut missing = Vec::new();
    for r in &dataset.test {
        match store.prefix(&r.id, AugKind::Rewrite, model, n) {
            Some(gens) => out.push(gens),
            None => missing.push(r.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingAugmentation {
            kind: AugKind::Rewrite,
            ids: missing,
        });
    }
    Ok(out)
}

fn index(g: &Global, a: IndexArgs) -> Result<()> {
    let cfg = load_config(g, &a.bm25)?;
    let dataset = open_dataset_dir(&g.data)?;
    let model = a.model.unwrap_or_else(|| cfg.llm_model.clone());
    let rewrites = if a.n == 0 {
        vec![Vec::new(); dataset.test.len()]
    } else {
        stored_rewrites(&AugmentationStore::open(&g.store)?, &dataset, &model, a.n)?
    };
    match a.mode {
        Mode::Sparse => {
            let docs: Vec<_> = dataset
                .test
                .iter()
                .zip(&rewrites)
                .map(|(r, gens)| build_augmented_code(r.id.clone(), &r.code, gens))
                .collect();
            index_corpus(&docs, bm25(&cfg), tokenizer(&a.bm25))?.save(&a.out)?;
        }
        Mode::Dense => {
            let client = embedder(&cfg)?;
            let codes: Vec<String> = dataset.test.iter().map(|r| r.code.clone()).collect();
            let code_vecs = embed(&codes, &client, cfg.embed_batch_size)?;
            let flat: Vec<String> = rewrites.iter().flatten().cloned().collect();
            let mut gen_vecs = embed(&flat, &client, cfg.embed_batch_size)?.into_iter();
            let mut vectors = Vec::with_capacity(codes.len());
            for (v, gens) in code_vecs.into_iter().zip(&rewrites) {
                if gens.is_empty() {
                    vectors.push(v);
                } else {
                    let g: Vec<_> = gen_vecs.by_ref().take(gens.len()).collect();
                    vectors.push(augment_representation(&v, &g)?);
                }
            }
            let ids = dataset.test.iter().map(|r| r.id.clone()).collect();
            DenseIndex::build(ids, &vectors)?.save(&a.out)?;
        }
    }
    print_json(&json!({
        "mode": match a.mode { Mode::Sparse => "sparse", Mode::Dense => "dense" },
        "docs": dataset.test.len(),
        "n": a.n,
        "out": a.out.display().to_string(),
    }));
    Ok(())
}

fn search(g: &Global, a: SearchArgs) -> Result<()> {
    let hits = match a.mode {
        Mode::Sparse => {
            let idx = SparseIndex::load(&a.index)?;
            idx.search(&build_augmented_query("query", &a.query, &[] as &[&str]), a.topk)
        }
        Mode::Dense => {
            let cfg = load_config(g, &Bm25Flags::default())?;
            let idx = DenseIndex::load(&a.index)?;
            let client = embedder(&cfg)?;
            let v = embed(std::slice::from_ref(&a.query), &client, 1)?.remove(0);
            idx.search(&v, a.topk)?
        }
    };
    for (rank, (id, score)) in hits.iter().enumerate() {
        print_json(&json!({"rank": rank + 1, "id": id, "score": score}));
    }
    Ok(())
}

fn emit_results(results: &[EvalResult], out: Option<&Path>) -> Result<()> {
    print!("{}", render_table(results));
    if results.len() > 1 {
        if let Some(best) = best_cell(results) {
            println!("best: {} (MRR {:.2})", best.config.label(), best.mrr * 100.0);
        }
    }
    if let Some(path) = out {
        write_jsonl(path, results)?;
    }
    Ok(())
}

fn eval(g: &Global, a: EvalArgs) -> Result<()> {
    let cfg = load_config(g, &a.bm25)?;
    let dataset = open_dataset_dir(&g.data)?;
    let retriever: Retriever = a.retriever.parse()?;
    let models = if a.model.is_empty() { vec![cfg.llm_model.clone()] } else { a.model };
    let ns = if a.n.is_empty() { vec![1] } else { a.n };
    let grid = |f: fn(Retriever, usize, String) -> PipelineConfig| {
        models
            .iter()
            .flat_map(|m| ns.iter().map(move |&n| f(retriever, n, m.clone())))
            .collect::<Vec<_>>()
    };
    let mut configs = match a.framework.as_str() {
        "all" => {
            let mut c = vec![PipelineConfig::baseline(retriever)];
            c.extend(grid(PipelineConfig::gar));
            c.extend(grid(PipelineConfig::reco));
            c
        }
        other => match other.parse::<Framework>()? {
            Framework::Baseline => vec![PipelineConfig::baseline(retriever)],
            Framework::Gar => grid(PipelineConfig::gar),
            Framework::Reco => grid(PipelineConfig::reco),
        },
    };
    if a.llm_only {
        configs = configs.into_iter().map(PipelineConfig::llm_only).collect();
    }
    for c in &configs {
        c.validate()?;
    }
    let store = AugmentationStore::open(&g.store)?;
    let client = dense_client(&cfg, retriever)?;
    let h = harness(&a.bm25, &cfg, &store, client.as_ref());
    let results = configs.iter().map(|c| h.run_eval(&dataset, c)).collect::<Result<Vec<_>>>()?;
    emit_results(&results, a.out.as_deref())
}

fn dense_client(cfg: &Config, retriever: Retriever) -> Result<Option<HttpEmbedder>> {
    match retriever {
        Retriever::Dense => Ok(Some(embedder(cfg)?)),
        Retriever::Sparse => Ok(None),
    }
}

fn harness<'a>(flags: &Bm25Flags, cfg: &Config, store: &'a AugmentationStore, client: Option<&'a HttpEmbedder>) -> Harness<'a> {
    let h = Harness::new(store).with_bm25(bm25(cfg), tokenizer(flags));
    match client {
        Some(c) => h.with_embedder(c, cfg.embed_batch_size),
        None => h,
    }
}

fn sweep(g: &Global, a: SweepArgs) -> Result<()> {
    let cfg = load_config(g, &a.bm25)?;
    let dataset = open_dataset_dir(&g.data)?;
    let retriever: Retriever = a.retriever.parse()?;
    let model = a.model.unwrap_or_else(|| cfg.llm_model.clone());
    let pipeline = match a.framework.parse::<Framework>()? {
        Framework::Gar => PipelineConfig::gar(retriever, a.max_n, model),
        Framework::Reco => PipelineConfig::reco(retriever, a.max_n, model),
        Framework::Baseline => return Err(Error::InvalidArgument("sweep needs --framework gar or reco".into())),
    };
    let store = AugmentationStore::open(&g.store)?;
    let client = dense_client(&cfg, retriever)?;
    let h = harness(&a.bm25, &cfg, &store, client.as_ref());
    let results: Vec<EvalResult> = h
        .gen_count_sweep(&dataset, &pipeline, a.max_n)?
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    emit_results(&results, a.out.as_deref())
}

fn select_best(g: &Global, a: SelectArgs) -> Result<()> {
    let cfg = load_config(g, &a.bm25)?;
    let dataset = open_dataset_dir(&g.data)?;
    let retriever: Retriever = a.retriever.parse()?;
    let sel = SelectionConfig {
        retriever,
        model: a.model.unwrap_or_else(|| cfg.llm_model.clone()),
        candidates: a.candidates,
        metric: a.metric,
        seed: a.seed.unwrap_or(cfg.seed),
    };
    let codes: Vec<&str> = dataset.test.iter().map(|r| r.code.as_str()).collect();
    let idf = StyleIdf::from_codes(&codes, dataset.language)?;
    let store = AugmentationStore::open(&g.store)?;
    let client = dense_client(&cfg, retriever)?;
    let r = harness(&a.bm25, &cfg, &store, client.as_ref()).best_vs_random(&dataset, &sel, &idf)?;
    eprintln!(
        "{} {}: {} best {:.4} random {:.4}; MRR best {:.2} random {:.2}",
        r.dataset,
        r.model,
        r.metric,
        r.metric_best,
        r.metric_random,
        r.mrr_best * 100.0,
        r.mrr_random * 100.0
    );
    print_json(&r);
    if let Some(path) = &a.out {
        write_jsonl(path, std::slice::from_ref(&r))?;
    }
    Ok(())
}

fn delta(a: DeltaArgs) -> Result<()> {
    let mut points = Vec::new();
    for path in &a.inputs {
        for v in read_jsonl::<serde_json::Value>(path)? {
            let p = match serde_json::from_value::<DeltaPoint>(v.clone()) {
                Ok(p) => p,
                Err(_) => serde_json::from_value::<SelectionResult>(v)
                    .map_err(|e| Error::InvalidArgument(format!("{}: not a delta point or selection result: {e}", path.display())))?
                    .delta_point(),
            };
            points.push(p);
        }
    }
    let summary = delta_analysis(&points)?;
    for p in &points {
        eprintln!(
            "{:<12} {:<20} {:<8} dmetric {:+.4} dMRR {:+.4}",
            p.dataset, p.model, p.metric, p.delta_metric, p.delta_mrr
        );
    }
    print_json(&summary);
    Ok(())
}

fn metric(a: MetricArgs) -> Result<()> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())));
    let hyp = read(&a.a)?;
    let reference = read(&a.b)?;
    let language: Language = a.language.parse()?;
    let idf = match &a.idf_corpus {
        Some(dir) => {
            let d = open_dataset_dir(dir)?;
            if d.language != language {
                return Err(Error::InvalidArgument(format!("idf corpus is {} but --language is {language}", d.language)));
            }
            let codes: Vec<&str> = d.train.iter().chain(&d.test).map(|r| r.code.as_str()).collect();
            StyleIdf::from_codes(&codes, language)?
        }
        None => StyleIdf::uniform(),
    };
    let report = match a.metric {
        MetricKind::Cssim => {
            let r = cssim_with(&hyp, &reference, language, &idf, StyleOptions { ted_labels: a.ted_labels })?;
            json!({"metric": a.metric, "value": r.cssim, "language": language.as_str(), "detail": r})
        }
        MetricKind::CodeBleu => {
            let r = codebleu_report(&hyp, &reference, language)?;
            json!({"metric": a.metric, "value": r.score, "language": language.as_str(), "detail": r})
        }
        m => {
            let s = metric_score(m, &hyp, &reference, language, &idf)?;
            json!({"metric": m, "value": s.value, "language": language.as_str()})
        }
    };
    print_json(&report);
    Ok(())
}
