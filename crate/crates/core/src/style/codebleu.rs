//! CodeBLEU: n-gram, keyword-weighted n-gram, syntax subtree and data-flow match.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::identifiers::binding_nodes;
use super::ngram::{bleu_tokens, code_tokens, weighted_bleu_tokens};
use super::syntax::{parse, SyntaxTree};
use crate::corpus::Language;
use crate::error::Result;

pub const KEYWORD_WEIGHT: f64 = 5.0;

/// Component scores. A component is `None` when the reference offers nothing
/// to match against; `score` averages the remaining ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeBleuReport {
    pub ngram: Option<f64>,
    pub weighted_ngram: Option<f64>,
    pub ast_match: Option<f64>,
    pub dataflow_match: Option<f64>,
    pub score: f64,
}

// Clipped multiset overlap divided by the reference size.
fn recall<K: std::hash::Hash + Eq>(hyp: &HashMap<K, usize>, reference: &HashMap<K, usize>) -> Option<f64> {
    let total: usize = reference.values().sum();
    if total == 0 {
        return None;
    }
    let hit: usize = reference
        .iter()
        .map(|(k, &c)| c.min(hyp.get(k).copied().unwrap_or(0)))
        .sum();
    Some(hit as f64 / total as f64)
}

/// Assigns equal ids to structurally equal subtrees (by node kind only).
#[derive(Default)]
struct Interner {
    ids: HashMap<(&'static str, Vec<u32>), u32>,
}

impl Interner {
    fn subtree_counts(&mut self, t: &SyntaxTree) -> HashMap<u32, usize> {
        let mut id = vec![0u32; t.len()];
        // Children have larger indices than parents, so reverse order is bottom-up.
        for i in (0..t.len()).rev() {
            let key = (t.node(i).kind, t.children(i).iter().map(|&c| id[c]).collect());
            let next = self.ids.len() as u32;
            id[i] = *self.ids.entry(key).or_insert(next);
        }
        let mut counts = HashMap::new();
        for v in id {
            *counts.entry(v).or_insert(0) += 1;
        }
        counts
    }
}

pub fn ast_match(hyp: &SyntaxTree, reference: &SyntaxTree) -> Option<f64> {
    let mut interner = Interner::default();
    let r = interner.subtree_counts(reference);
    let h = interner.subtree_counts(hyp);
    recall(&h, &r)
}

type Edge = (String, &'static str, Vec<String>);

fn flow_pairs(t: &SyntaxTree) -> Vec<(usize, usize)> {
    let pairs: &[(&str, &str, &str)] = match t.language {
        Language::Python => &[
            ("assignment", "left", "right"),
            ("augmented_assignment", "left", "right"),
            ("for_statement", "left", "right"),
            ("for_in_clause", "left", "right"),
            ("named_expression", "name", "value"),
        ],
        Language::Java => &[
            ("variable_declarator", "name", "value"),
            ("assignment_expression", "left", "right"),
            ("enhanced_for_statement", "name", "value"),
        ],
    };
    let mut out = Vec::new();
    for i in 0..t.len() {
        for &(kind, target, value) in pairs {
            if t.node(i).kind == kind {
                if let (Some(a), Some(b)) = (t.child_by_field(i, target), t.child_by_field(i, value)) {
                    out.push((a, b));
                }
            }
        }
    }
    out
}

/// Def-use edges with variables renamed `var_0, var_1, ...` in order of first
/// appearance. Each assignment yields `target computedFrom sources`; every
/// other read of a variable yields `v comesFrom v`.
pub fn dataflow_edges(t: &SyntaxTree) -> Vec<Edge> {
    if t.fallback {
        return Vec::new();
    }
    let bindings: HashSet<usize> = binding_nodes(t).into_iter().collect();
    let vars: HashSet<&str> = bindings.iter().map(|&n| t.text(n)).collect();
    let is_var_ref = |i: usize| {
        let n = t.node(i);
        if n.kind != "identifier" || !vars.contains(t.text(i)) {
            return false;
        }
        match n.field {
            Some("attribute") | Some("field") => false,
            Some("name") => bindings.contains(&i),
            _ => true,
        }
    };
    let mut rename: HashMap<&str, String> = HashMap::new();
    for i in 0..t.len() {
        if is_var_ref(i) {
            let next = rename.len();
            rename.entry(t.text(i)).or_insert_with(|| format!("var_{next}"));
        }
    }
    let name = |i: usize| rename[t.text(i)].clone();
    let refs_in = |root: usize| -> Vec<usize> { t.descendants(root).into_iter().filter(|&d| is_var_ref(d)).collect() };

    let mut edges = Vec::new();
    let mut in_targets = HashSet::new();
    for (target, value) in flow_pairs(t) {
        let mut sources: Vec<String> = refs_in(value).into_iter().map(name).collect();
        sources.sort();
        sources.dedup();
        for v in refs_in(target) {
            in_targets.insert(v);
            edges.push((name(v), "computedFrom", sources.clone()));
        }
    }
    for i in 0..t.len() {
        if is_var_ref(i) && !bindings.contains(&i) && !in_targets.contains(&i) {
            edges.push((name(i), "comesFrom", vec![name(i)]));
        }
    }
    edges
}

pub fn dataflow_match(hyp: &SyntaxTree, reference: &SyntaxTree) -> Option<f64> {
    let count = |edges: Vec<Edge>| {
        let mut m = HashMap::new();
        for e in edges {
            *m.entry(e).or_insert(0) += 1;
        }
        m
    };
    recall(&count(dataflow_edges(hyp)), &count(dataflow_edges(reference)))
}

pub fn codebleu_report(hyp: &str, reference: &str, language: Language) -> Result<CodeBleuReport> {
    let ht = code_tokens(hyp, Some(language));
    let rt = code_tokens(reference, Some(language));
    let (ngram, weighted_ngram) = if rt.is_empty() {
        (None, None)
    } else {
        (
            Some(bleu_tokens(&ht, &rt)),
            Some(weighted_bleu_tokens(&ht, &rt, language, KEYWORD_WEIGHT)),
        )
    };
    let htree = parse(hyp, language)?;
    let rtree = parse(reference, language)?;
    let ast = ast_match(&htree, &rtree);
    let flow = dataflow_match(&htree, &rtree);
    let present: Vec<f64> = [ngram, weighted_ngram, ast, flow].into_iter().flatten().collect();
    let score = if present.is_empty() {
        1.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(CodeBleuReport {
        ngram,
        weighted_ngram,
        ast_match: ast,
        dataflow_match: flow,
        score: score.clamp(0.0, 1.0),
    })
}

pub fn codebleu(hyp: &str, reference: &str, language: Language) -> Result<f64> {
    Ok(codebleu_report(hyp, reference, language)?.score)
}
