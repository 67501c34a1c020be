//! Fixtures shared by the integration tests and the acceptance target.
#![allow(dead_code)]

pub mod oracles;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use reco_core::augmentor::{AugmentJob, Augmentor, LanguageModel};
use reco_core::corpus::{AugmentationStore, Dataset, Language, LlmCache, PairRecord};
use reco_core::dense::Embedder;
use reco_core::Result;

const VERBS: &[&str] = &["strip", "upper", "lower", "title", "split", "encode", "count", "index", "find", "join"];
const NOUNS: &[&str] = &["name", "word", "line", "path", "token", "label", "field", "title", "entry", "phrase"];

fn train_pairs(language: Language) -> Vec<PairRecord> {
    (0..8)
        .map(|i| {
            let code = match language {
                Language::Python => format!("def helper_{i}(x):\n    return x + {i}\n"),
                Language::Java => format!("class H{i} {{ int helper(int x) {{ return x + {i}; }} }}"),
            };
            PairRecord::new(format!("train-{i}"), format!("add {i} to a number"), code, language)
        })
        .collect()
}

/// `n` pairs whose codes are mutually distinct and carry a per-item token.
pub fn distinct_corpus(n: usize) -> Dataset {
    let test = (0..n)
        .map(|i| {
            let verb = VERBS[i % VERBS.len()];
            let noun = NOUNS[(i / VERBS.len()) % NOUNS.len()];
            let code = format!(
                "def {verb}_{noun}s_{i}({noun}s):\n    return [{noun}.{verb}() for {noun} in {noun}s if {noun} != '{i}']\n"
            );
            let query = format!("{verb} every {noun} in a list except item {i}");
            PairRecord::new(format!("d{i}"), query, code, Language::Python)
        })
        .collect();
    Dataset::new("distinct", Language::Python, train_pairs(Language::Python), test).unwrap()
}

const OPS: &[(&str, &str, &str)] = &[
    ("largest", "max", "float('-inf')"),
    ("smallest", "min", "float('inf')"),
    ("absolute total", "abs", "0"),
    ("rounded total", "round", "0"),
    ("integer total", "int", "0"),
    ("length total", "len", "0"),
    ("hash total", "hash", "0"),
    ("boolean count", "bool", "0"),
    ("ordinal total", "ord", "0"),
    ("string length total", "str", "0"),
];
const THINGS: &[&str] = &["prices", "scores", "weights", "heights", "ages", "sizes", "counts", "ratings", "speeds", "depths"];

/// A corpus whose true codes are style-perturbed copies of what the mock
/// model generates: identifiers renamed and `for` loops rewritten as index
/// `while` loops. Returns the dataset and the mock's generation and
/// summarization tables.
pub struct StyleCorpus {
    pub dataset: Dataset,
    pub gen: HashMap<String, String>,
    pub sum: HashMap<String, String>,
}

pub fn style_perturbed_corpus() -> StyleCorpus {
    let mut test = Vec::new();
    let mut gen = HashMap::new();
    let mut sum = HashMap::new();
    for (oi, &(desc, api, init)) in OPS.iter().enumerate() {
        for (ti, thing) in THINGS.iter().enumerate() {
            let i = oi * THINGS.len() + ti;
            let singular = thing.trim_end_matches('s');
            let query = format!("return the {desc} of a list of {thing}");
            let combine = match api {
                "max" | "min" => format!("{api}(result, {singular})"),
                "str" => format!("result + len({api}({singular}))"),
                _ => format!("result + {api}({singular})"),
            };
            let exemplar = format!(
                "def {}_{thing}({thing}):\n    result = {init}\n    for {singular} in {thing}:\n        result = {combine}\n    return result\n",
                desc.replace(' ', "_")
            );
            let perturbed_combine = combine.replace("result", "acc").replace(singular, "xs[k]");
            let truth = format!(
                "def f{i}(xs):\n    acc = {init}\n    k = 0\n    while k < len(xs):\n        acc = {perturbed_combine}\n        k += 1\n    return acc\n"
            );
            gen.insert(query.clone(), exemplar);
            sum.insert(truth.clone(), query.clone());
            test.push(PairRecord::new(format!("s{i}"), query, truth, Language::Python));
        }
    }
    let dataset = Dataset::new("style", Language::Python, train_pairs(Language::Python), test).unwrap();
    StyleCorpus { dataset, gen, sum }
}

/// Generates `n` exemplars and `n` rewrites for every test pair.
pub fn augment_all(dataset: &Dataset, llm: &dyn LanguageModel, store: &AugmentationStore, n: usize) -> Result<()> {
    let cache = LlmCache::in_memory();
    let aug = Augmentor::new(llm, &cache, store, &dataset.train, dataset.language);
    for job in [AugmentJob::Exemplars, AugmentJob::Rewrites] {
        let report = aug.run_job(&dataset.test, job, n, 7, 2);
        if let Some((_, e)) = report.failures.into_iter().next() {
            return Err(e);
        }
    }
    Ok(())
}

/// Deterministic bag-of-tokens embedder using feature hashing.
pub struct HashEmbedder {
    pub dim: usize,
}

impl Embedder for HashEmbedder {
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dim];
                for tok in reco_core::sparse::tokenize(t) {
                    let h = tok.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
                    v[(h % self.dim as u64) as usize] += 1.0;
                }
                // Keep a non-zero component so every text has a direction.
                v[0] += 0.01;
                v
            })
            .collect())
    }
}

const PY_VARS: &[&str] = &["x", "y", "total", "count", "word_count", "words_count", "items", "acc", "i", "result"];
const PY_APIS: &[&str] = &["len", "print", "sorted", "sum", "os.path.join", "collections.Counter", "math.sqrt", "str"];
const PY_METHODS: &[&str] = &["append", "get", "items", "split", "strip"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn py_expr<R: Rng>(rng: &mut R, depth: usize) -> String {
    let choice = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..6) };
    match choice {
        0 => pick(rng, PY_VARS).to_string(),
        1 => rng.gen_range(0..100).to_string(),
        2 => format!("{}({})", pick(rng, PY_APIS), py_expr(rng, depth - 1)),
        3 => format!("{} {} {}", py_expr(rng, depth - 1), pick(rng, &["+", "-", "*", "%"]), py_expr(rng, depth - 1)),
        4 => format!("{}.{}({})", pick(rng, PY_VARS), pick(rng, PY_METHODS), py_expr(rng, depth - 1)),
        _ => format!("[{} for {} in {}]", py_expr(rng, depth - 1), pick(rng, PY_VARS), pick(rng, PY_VARS)),
    }
}

fn py_block<R: Rng>(rng: &mut R, indent: usize, depth: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for _ in 0..rng.gen_range(1..4) {
        let choice = if depth == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..5) };
        match choice {
            0 => out.push_str(&format!("{pad}{} = {}\n", pick(rng, PY_VARS), py_expr(rng, 2))),
            1 => out.push_str(&format!("{pad}{} += {}\n", pick(rng, PY_VARS), py_expr(rng, 1))),
            2 => out.push_str(&format!("{pad}{}\n", py_expr(rng, 2))),
            3 => {
                out.push_str(&format!("{pad}for {} in {}:\n", pick(rng, PY_VARS), py_expr(rng, 1)));
                py_block(rng, indent + 1, depth - 1, out);
            }
            _ => {
                out.push_str(&format!("{pad}if {} > {}:\n", py_expr(rng, 1), py_expr(rng, 0)));
                py_block(rng, indent + 1, depth - 1, out);
            }
        }
    }
}

/// A random, usually well-formed python snippet.
pub fn random_python<R: Rng>(rng: &mut R) -> String {
    let mut s = String::new();
    if rng.gen_bool(0.6) {
        let params: Vec<&str> = (0..rng.gen_range(0..3)).map(|_| pick(rng, PY_VARS)).collect();
        s.push_str(&format!("def {}({}):\n", pick(rng, &["f", "count_words", "solve"]), params.join(", ")));
        py_block(rng, 1, 2, &mut s);
        s.push_str(&format!("    return {}\n", py_expr(rng, 1)));
    } else {
        py_block(rng, 0, 2, &mut s);
    }
    maybe_break(rng, s)
}

const J_VARS: &[&str] = &["x", "y", "total", "count", "list", "acc", "i", "result"];
const J_CALLS: &[&str] = &["System.out.println", "Math.max", "list.add", "helper", "this.apply", "Integer.parseInt"];

fn java_expr<R: Rng>(rng: &mut R, depth: usize) -> String {
    let choice = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..5) };
    match choice {
        0 => pick(rng, J_VARS).to_string(),
        1 => rng.gen_range(0..100).to_string(),
        2 => format!("{}({})", pick(rng, J_CALLS), java_expr(rng, depth - 1)),
        3 => format!("{} {} {}", java_expr(rng, depth - 1), pick(rng, &["+", "-", "*"]), java_expr(rng, depth - 1)),
        _ => format!("new {}<>()", pick(rng, &["ArrayList", "HashMap", "java.util.LinkedList"])),
    }
}

fn java_block<R: Rng>(rng: &mut R, depth: usize, out: &mut String) {
    for _ in 0..rng.gen_range(1..4) {
        let choice = if depth == 0 { rng.gen_range(0..3) } else { rng.gen_range(0..5) };
        match choice {
            0 => out.push_str(&format!("int {} = {}; ", pick(rng, J_VARS), java_expr(rng, 2))),
            1 => out.push_str(&format!("{} += {}; ", pick(rng, J_VARS), java_expr(rng, 1))),
            2 => out.push_str(&format!("{}; ", java_expr(rng, 2))),
            3 => {
                let v = pick(rng, J_VARS);
                out.push_str(&format!("for (int {v} = 0; {v} < {}; {v}++) {{ ", java_expr(rng, 0)));
                java_block(rng, depth - 1, out);
                out.push_str("} ");
            }
            _ => {
                out.push_str(&format!("if ({} > {}) {{ ", java_expr(rng, 1), java_expr(rng, 0)));
                java_block(rng, depth - 1, out);
                out.push_str("} ");
            }
        }
    }
}

/// A random, usually well-formed java snippet.
pub fn random_java<R: Rng>(rng: &mut R) -> String {
    let mut s = format!("class A {{ int {}(int {}) {{ ", pick(rng, &["f", "solve"]), pick(rng, J_VARS));
    java_block(rng, 2, &mut s);
    s.push_str(&format!("return {}; }} }}", java_expr(rng, 1)));
    maybe_break(rng, s)
}

// About one snippet in ten loses a closing bracket, exercising the fallback tree.
fn maybe_break<R: Rng>(rng: &mut R, s: String) -> String {
    if rng.gen_bool(0.1) {
        if let Some(p) = s.rfind([')', '}']) {
            let mut b = s;
            b.remove(p);
            return b;
        }
    }
    s
}

pub fn random_snippet<R: Rng>(rng: &mut R, language: Language) -> String {
    match language {
        Language::Python => random_python(rng),
        Language::Java => random_java(rng),
    }
}
