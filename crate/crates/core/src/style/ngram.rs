//! BLEU-4, keyword-weighted BLEU and ROUGE-L over code tokens.

use std::collections::HashMap;

use super::lexer::lex;
use crate::corpus::Language;

pub const MAX_ORDER: usize = 4;

/// Code tokens as text. Comments are dropped when the language is given.
pub fn code_tokens(text: &str, language: Option<Language>) -> Vec<&str> {
    lex(text, language).into_iter().map(|t| t.text).collect()
}

fn ngram_counts<'a, 'b>(toks: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for g in toks.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

// Per-order (matched, total) counts with clipping. `weight` scales unigrams.
fn matches(hyp: &[&str], reference: &[&str], n: usize, weight: &dyn Fn(&str) -> f64) -> (f64, f64) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let mut matched = 0.0;
    let mut total = 0.0;
    for (g, &c) in &h {
        let w = if n == 1 { weight(g[0]) } else { 1.0 };
        matched += w * c.min(r.get(g).copied().unwrap_or(0)) as f64;
        total += w * c as f64;
    }
    (matched, total)
}

fn bleu_with(hyp: &[&str], reference: &[&str], weight: &dyn Fn(&str) -> f64) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (m, c) = matches(hyp, reference, n, weight);
        let p = if n == 1 {
            if m == 0.0 {
                return 0.0;
            }
            m / c
        } else {
            (m + 1.0) / (c + 1.0)
        };
        log_sum += p.ln();
    }
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * (log_sum / MAX_ORDER as f64).exp()).clamp(0.0, 1.0)
}

/// Sentence BLEU-4 on token sequences: unsmoothed unigram precision, add-one
/// smoothing for orders 2 to 4, standard brevity penalty.
pub fn bleu_tokens(hyp: &[&str], reference: &[&str]) -> f64 {
    bleu_with(hyp, reference, &|_| 1.0)
}

/// BLEU-4 where unigram matches of language keywords count `keyword_weight` times.
pub fn weighted_bleu_tokens(hyp: &[&str], reference: &[&str], language: Language, keyword_weight: f64) -> f64 {
    bleu_with(hyp, reference, &|t| {
        if super::lexer::is_keyword(t, language) {
            keyword_weight
        } else {
            1.0
        }
    })
}

pub fn bleu(hyp: &str, reference: &str) -> f64 {
    bleu_tokens(&code_tokens(hyp, None), &code_tokens(reference, None))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l_tokens(hyp: &[&str], reference: &[&str]) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let l = lcs_len(hyp, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / hyp.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-L F1 over code tokens.
pub fn rouge_l(hyp: &str, reference: &str) -> f64 {
    rouge_l_tokens(&code_tokens(hyp, None), &code_tokens(reference, None))
}
