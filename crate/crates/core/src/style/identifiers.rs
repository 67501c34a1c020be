//! Variable and API name extraction.
//!
//! Variables are names *bound* by the code: assignment and loop targets,
//! parameters, `as` aliases (Python) or declarators, parameters and
//! catch/for/resource names (Java). Function and class names are not
//! variables. APIs are callee names at call sites, written as the dotted path
//! that appears in the source (`collections.Counter`, `System.out.println`).

use std::collections::BTreeMap;

use serde::Serialize;

use super::lexer::{lex, TokenKind};
use super::syntax::SyntaxTree;
use crate::corpus::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Variable,
    Api,
}

/// Distinct identifier texts with occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifierSet {
    pub role: Role,
    counts: BTreeMap<String, usize>,
}

impl IdentifierSet {
    pub fn new(role: Role) -> Self {
        IdentifierSet {
            role,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_names<S: Into<String>>(role: Role, names: impl IntoIterator<Item = S>) -> Self {
        let mut s = Self::new(role);
        for n in names {
            s.insert(n);
        }
        s
    }

    pub fn insert(&mut self, name: impl Into<String>) {
        let name = name.into();
        if !name.is_empty() {
            *self.counts.entry(name).or_default() += 1;
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.counts.contains_key(name)
    }

    pub fn count(&self, name: &str) -> usize {
        self.counts.get(name).copied().unwrap_or(0)
    }

    /// Distinct names in sorted order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Adds every identifier bound by a (possibly nested) target pattern.
pub(crate) fn collect_pattern_names(t: &SyntaxTree, node: usize, out: &mut Vec<usize>) {
    match t.node(node).kind {
        "identifier" => out.push(node),
        "pattern_list" | "tuple_pattern" | "list_pattern" | "tuple" | "list" | "expression_list"
        | "parenthesized_expression" | "list_splat_pattern" | "list_splat" | "as_pattern_target" => {
            for &c in t.children(node) {
                collect_pattern_names(t, c, out);
            }
        }
        _ => {}
    }
}

fn python_param_names(t: &SyntaxTree, params: usize, out: &mut Vec<usize>) {
    for &p in t.children(params) {
        match t.node(p).kind {
            "identifier" => out.push(p),
            "default_parameter" | "typed_default_parameter" => {
                if let Some(n) = t.child_by_field(p, "name") {
                    collect_pattern_names(t, n, out);
                }
            }
            "typed_parameter" | "list_splat_pattern" | "dictionary_splat_pattern" => {
                for &c in t.children(p) {
                    if t.node(c).field.is_none() {
                        match t.node(c).kind {
                            "identifier" => out.push(c),
                            "list_splat_pattern" | "dictionary_splat_pattern" => {
                                python_param_names(t, p, out);
                            }
                            _ => {}
                        }
                        break;
                    }
                }
            }
            "tuple_pattern" => collect_pattern_names(t, p, out),
            _ => {}
        }
    }
}

/// Node ids of identifiers in binding position.
pub(crate) fn binding_nodes(t: &SyntaxTree) -> Vec<usize> {
    let mut out = Vec::new();
    if t.fallback {
        return out;
    }
    for i in 0..t.len() {
        let field = |f| t.child_by_field(i, f);
        match (t.language, t.node(i).kind) {
            (Language::Python, "assignment" | "augmented_assignment" | "for_statement" | "for_in_clause") => {
                if let Some(l) = field("left") {
                    collect_pattern_names(t, l, &mut out);
                }
            }
            (Language::Python, "parameters" | "lambda_parameters") => python_param_names(t, i, &mut out),
            (Language::Python, "as_pattern") => {
                if let Some(a) = field("alias") {
                    collect_pattern_names(t, a, &mut out);
                }
            }
            (Language::Python, "named_expression") => {
                if let Some(n) = field("name") {
                    collect_pattern_names(t, n, &mut out);
                }
            }
            (
                Language::Java,
                "variable_declarator" | "formal_parameter" | "catch_formal_parameter" | "enhanced_for_statement"
                | "resource" | "instanceof_expression",
            ) => {
                if let Some(n) = field("name").filter(|&n| t.node(n).kind == "identifier") {
                    out.push(n);
                }
            }
            (Language::Java, "lambda_expression") => {
                if let Some(p) = field("parameters") {
                    match t.node(p).kind {
                        "identifier" => out.push(p),
                        "inferred_parameters" => out.extend(
                            t.children(p).iter().copied().filter(|&c| t.node(c).kind == "identifier"),
                        ),
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }
    out
}

pub fn extract_variables(t: &SyntaxTree) -> IdentifierSet {
    if t.fallback {
        return fallback_variables(t);
    }
    IdentifierSet::from_names(Role::Variable, binding_nodes(t).into_iter().map(|n| t.text(n)))
}

// `a.b.c` as written, if `node` is a plain name chain.
fn dotted(t: &SyntaxTree, node: usize) -> Option<String> {
    match (t.language, t.node(node).kind) {
        (_, "identifier") | (Language::Java, "this" | "super") => Some(t.text(node).to_string()),
        (Language::Python, "attribute") => {
            let obj = dotted(t, t.child_by_field(node, "object")?)?;
            let attr = t.text(t.child_by_field(node, "attribute")?);
            Some(format!("{obj}.{attr}"))
        }
        (Language::Java, "field_access") => {
            let obj = dotted(t, t.child_by_field(node, "object")?)?;
            let field = t.text(t.child_by_field(node, "field")?);
            Some(format!("{obj}.{field}"))
        }
        (Language::Java, "type_identifier") => Some(t.text(node).to_string()),
        (Language::Java, "scoped_type_identifier") => Some(t.text(node).split_whitespace().collect()),
        _ => None,
    }
}

fn callee(t: &SyntaxTree, i: usize) -> Option<String> {
    match (t.language, t.node(i).kind) {
        (Language::Python, "call") => {
            let f = t.child_by_field(i, "function")?;
            dotted(t, f).or_else(|| {
                // Receiver is not a plain name (e.g. a call): keep the method name.
                (t.node(f).kind == "attribute")
                    .then(|| t.child_by_field(f, "attribute"))
                    .flatten()
                    .map(|a| t.text(a).to_string())
            })
        }
        (Language::Java, "method_invocation") => {
            let name = t.text(t.child_by_field(i, "name")?);
            match t.child_by_field(i, "object").and_then(|o| dotted(t, o)) {
                Some(obj) => Some(format!("{obj}.{name}")),
                None => Some(name.to_string()),
            }
        }
        (Language::Java, "object_creation_expression") => {
            let ty = t.child_by_field(i, "type")?;
            match t.node(ty).kind {
                "generic_type" => t.children(ty).first().and_then(|&c| dotted(t, c)),
                _ => dotted(t, ty),
            }
        }
        _ => None,
    }
}

pub fn extract_apis(t: &SyntaxTree) -> IdentifierSet {
    if t.fallback {
        return fallback_apis(t);
    }
    IdentifierSet::from_names(Role::Api, (0..t.len()).filter_map(|i| callee(t, i)))
}

// Token heuristics for trees the grammar rejected: `name =` binds a variable,
// `a.b(` calls an API.
fn fallback_variables(t: &SyntaxTree) -> IdentifierSet {
    let toks = lex(&t.source, Some(t.language));
    let mut set = IdentifierSet::new(Role::Variable);
    for (k, tok) in toks.iter().enumerate() {
        let after_dot = k > 0 && toks[k - 1].text == ".";
        if tok.kind == TokenKind::Identifier && !after_dot && toks.get(k + 1).is_some_and(|n| n.text == "=") {
            set.insert(tok.text);
        }
    }
    set
}

fn fallback_apis(t: &SyntaxTree) -> IdentifierSet {
    let toks = lex(&t.source, Some(t.language));
    let mut set = IdentifierSet::new(Role::Api);
    let mut k = 0;
    while k < toks.len() {
        if toks[k].kind != TokenKind::Identifier || (k > 0 && toks[k - 1].text == ".") {
            k += 1;
            continue;
        }
        let defines = k > 0 && matches!(toks[k - 1].text, "def" | "class");
        let mut path = toks[k].text.to_string();
        let mut j = k + 1;
        while j + 1 < toks.len() && toks[j].text == "." && toks[j + 1].kind == TokenKind::Identifier {
            path.push('.');
            path.push_str(toks[j + 1].text);
            j += 2;
        }
        if !defines && toks.get(j).is_some_and(|n| n.text == "(") {
            set.insert(path);
        }
        k = j;
    }
    set
}
