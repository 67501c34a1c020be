//! Code style similarity (CSSim) and the n-gram baselines it is compared with.
//!
//! CSSim combines three distances in `[0, 1]`: variable naming, API choice and
//! syntax tree shape. `cssim = 1 - (dis_var + dis_api + ted) / 3`.

pub mod codebleu;
pub mod edit;
pub mod identifiers;
pub mod lexer;
pub mod ngram;
pub mod syntax;
pub mod ted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use codebleu::{codebleu, codebleu_report, CodeBleuReport};
pub use edit::{dis_one_sided, dis_symmetric, levenshtein, norm_edit_distance, IdfTable};
pub use identifiers::{extract_apis, extract_variables, IdentifierSet, Role};
pub use ngram::{bleu, rouge_l};
pub use syntax::{parse, SyntaxTree, MAX_NODES};
pub use ted::{raw_tree_edit_distance, zhang_shasha, PostorderTree, TedLabels};

use crate::corpus::Language;
use crate::error::{Error, Result};

/// IDF tables for the two identifier roles, built over one codebase.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleIdf {
    pub variables: IdfTable,
    pub apis: IdfTable,
}

impl StyleIdf {
    pub fn uniform() -> Self {
        StyleIdf {
            variables: IdfTable::uniform(),
            apis: IdfTable::uniform(),
        }
    }

    /// Each snippet is one document.
    pub fn from_codes<S: AsRef<str>>(codes: &[S], language: Language) -> Result<Self> {
        let mut vars = Vec::with_capacity(codes.len());
        let mut apis = Vec::with_capacity(codes.len());
        for c in codes {
            let t = parse(c.as_ref(), language)?;
            vars.push(extract_variables(&t));
            apis.push(extract_apis(&t));
        }
        Ok(StyleIdf {
            variables: IdfTable::from_sets(&vars)?,
            apis: IdfTable::from_sets(&apis)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StyleOptions {
    pub ted_labels: TedLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleReport {
    pub dis_var: f64,
    pub dis_api: f64,
    pub ted: f64,
    pub csdis: f64,
    pub cssim: f64,
    pub fallback_a: bool,
    pub fallback_b: bool,
}

/// Edit distance divided by the larger node count, capped at 1.
///
/// The cap matters only for trees of very different shape (a flat fallback
/// tree against a deep one), where the cheapest script can exceed the larger
/// size.
pub fn tree_edit_distance(a: &SyntaxTree, b: &SyntaxTree, labels: TedLabels) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    (raw_tree_edit_distance(a, b, labels) as f64 / longest as f64).min(1.0)
}

pub fn cssim(a: &str, b: &str, language: Language, idf: &StyleIdf) -> Result<StyleReport> {
    cssim_with(a, b, language, idf, StyleOptions::default())
}

pub fn cssim_with(a: &str, b: &str, language: Language, idf: &StyleIdf, opts: StyleOptions) -> Result<StyleReport> {
    let ta = parse(a, language)?;
    let tb = parse(b, language)?;
    Ok(cssim_trees(&ta, &tb, idf, opts))
}

pub fn cssim_trees(ta: &SyntaxTree, tb: &SyntaxTree, idf: &StyleIdf, opts: StyleOptions) -> StyleReport {
    let dis_var = dis_symmetric(&extract_variables(ta), &extract_variables(tb), &idf.variables);
    let dis_api = dis_symmetric(&extract_apis(ta), &extract_apis(tb), &idf.apis);
    let ted = tree_edit_distance(ta, tb, opts.ted_labels);
    let csdis = (dis_var + dis_api + ted) / 3.0;
    StyleReport {
        dis_var,
        dis_api,
        ted,
        csdis,
        cssim: 1.0 - csdis,
        fallback_a: ta.fallback,
        fallback_b: tb.fallback,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Cssim,
    Bleu,
    RougeL,
    #[serde(rename = "codebleu")]
    CodeBleu,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::Cssim, MetricKind::Bleu, MetricKind::RougeL, MetricKind::CodeBleu];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Cssim => "cssim",
            MetricKind::Bleu => "bleu",
            MetricKind::RougeL => "rouge_l",
            MetricKind::CodeBleu => "codebleu",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric '{s}' (expected cssim, bleu, rouge_l or codebleu)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricScore {
    pub metric: MetricKind,
    pub value: f64,
}

/// Similarity of `hyp` to `reference` under `metric`, in `[0, 1]`.
pub fn metric_score(
    metric: MetricKind,
    hyp: &str,
    reference: &str,
    language: Language,
    idf: &StyleIdf,
) -> Result<MetricScore> {
    let value = match metric {
        MetricKind::Cssim => cssim(hyp, reference, language, idf)?.cssim,
        MetricKind::Bleu => bleu(hyp, reference),
        MetricKind::RougeL => rouge_l(hyp, reference),
        MetricKind::CodeBleu => codebleu(hyp, reference, language)?,
    };
    Ok(MetricScore { metric, value })
}
