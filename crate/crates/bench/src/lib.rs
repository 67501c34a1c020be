//! Synthetic inputs shared by the benchmarks.

use reco_core::sparse::{build_augmented_code, AugmentedText};

const VERBS: &[&str] = &["sort", "filter", "count", "merge", "split", "reverse", "sum", "find"];
const NOUNS: &[&str] = &["list", "matrix", "string", "words", "rows", "items", "keys", "values"];

/// A python function of roughly `lines` statements, varied by `seed`.
pub fn python_snippet(seed: usize, lines: usize) -> String {
    let verb = VERBS[seed % VERBS.len()];
    let noun = NOUNS[(seed / VERBS.len()) % NOUNS.len()];
    let mut s = format!("def {verb}_{noun}_{seed}({noun}, limit):\n    result = []\n");
    for i in 0..lines {
        match (seed + i) % 4 {
            0 => s.push_str(&format!("    for x{i} in {noun}:\n        result.append(x{i} * {i})\n")),
            1 => s.push_str(&format!("    if len(result) > limit:\n        result = sorted(result)[:{i}]\n")),
            2 => s.push_str(&format!("    total_{i} = sum(result) + {i}\n")),
            _ => s.push_str(&format!("    result = [y for y in result if y != {i}]\n")),
        }
    }
    s.push_str("    return result\n");
    s
}

/// `n` code documents for index benchmarks.
pub fn corpus(n: usize) -> Vec<AugmentedText> {
    (0..n)
        .map(|i| build_augmented_code(format!("c{i}"), &python_snippet(i, 6), &[] as &[&str]))
        .collect()
}
