//! Levenshtein distance and the IDF-weighted identifier distances.

use std::collections::BTreeMap;

use super::identifiers::IdentifierSet;
use crate::error::{Error, Result};

/// Unit-cost Levenshtein distance over any comparable sequence.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let next = (diag + usize::from(x != y)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Levenshtein over characters divided by the longer length; 0 when both are empty.
pub fn norm_edit_distance(a: &str, b: &str) -> f64 {
    if a.is_ascii() && b.is_ascii() {
        let longest = a.len().max(b.len());
        if longest == 0 {
            return 0.0;
        }
        return levenshtein(a.as_bytes(), b.as_bytes()) as f64 / longest as f64;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(&a, &b) as f64 / longest as f64
}

/// Smoothed inverse document frequency over code snippets.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    docs: usize,
    df: BTreeMap<String, usize>,
}

impl IdfTable {
    /// Counts each name once per snippet.
    pub fn from_sets<'a>(sets: impl IntoIterator<Item = &'a IdentifierSet>) -> Result<Self> {
        let mut docs = 0;
        let mut df = BTreeMap::new();
        for set in sets {
            docs += 1;
            for name in set.names() {
                *df.entry(name.to_string()).or_insert(0) += 1;
            }
        }
        if docs == 0 {
            return Err(Error::invalid("idf corpus is empty"));
        }
        Ok(IdfTable { docs, df })
    }

    /// Every name weighs 1.
    pub fn uniform() -> Self {
        IdfTable {
            docs: 0,
            df: BTreeMap::new(),
        }
    }

    pub fn docs(&self) -> usize {
        self.docs
    }

    pub fn doc_freq(&self, name: &str) -> usize {
        self.df.get(name).copied().unwrap_or(0)
    }

    pub fn weight(&self, name: &str) -> f64 {
        let d = self.docs as f64;
        ((d + 1.0) / (self.doc_freq(name) as f64 + 1.0)).ln() + 1.0
    }
}

/// Weighted mean over `v1` of the distance to the closest name in `v2`.
pub fn dis_one_sided(v1: &IdentifierSet, v2: &IdentifierSet, idf: &IdfTable) -> f64 {
    match (v1.is_empty(), v2.is_empty()) {
        (true, true) => return 0.0,
        (_, true) | (true, _) => return 1.0,
        _ => {}
    }
    let mut total = 0.0;
    let mut mass = 0.0;
    for a in v1.names() {
        let w = idf.weight(a);
        let closest = v2
            .names()
            .map(|b| if a == b { 0.0 } else { norm_edit_distance(a, b) })
            .fold(f64::INFINITY, f64::min);
        total += w * closest;
        mass += w;
    }
    (total / mass).clamp(0.0, 1.0)
}

pub fn dis_symmetric(v1: &IdentifierSet, v2: &IdentifierSet, idf: &IdfTable) -> f64 {
    (dis_one_sided(v1, v2, idf) + dis_one_sided(v2, v1, idf)) / 2.0
}
