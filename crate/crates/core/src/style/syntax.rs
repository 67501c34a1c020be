//! Syntax trees from tree-sitter grammars, with a flat token fallback for
//! input the grammar rejects.

use std::cell::RefCell;
use std::collections::HashSet;
use std::sync::{Mutex, OnceLock};

use tree_sitter::Parser;

use super::lexer::lex;
use crate::corpus::Language;
use crate::error::{Error, Result};

/// Largest tree accepted by the style metrics.
pub const MAX_NODES: usize = 5000;

pub const FALLBACK_ROOT: &str = "fallback";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: &'static str,
    /// Grammar field this node fills in its parent, if any.
    pub field: Option<&'static str>,
    pub start: usize,
    pub end: usize,
    pub children: Vec<usize>,
}

/// Ordered tree of named syntax nodes. Node 0 is the root; children always
/// have larger indices than their parent (preorder numbering).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    pub language: Language,
    pub source: String,
    pub nodes: Vec<Node>,
    /// True when the grammar failed and the tree is one token per leaf.
    pub fallback: bool,
}

impl SyntaxTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn text(&self, i: usize) -> &str {
        let n = &self.nodes[i];
        &self.source[n.start..n.end]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.nodes[i].children
    }

    pub fn child_by_field(&self, i: usize, field: &str) -> Option<usize> {
        self.nodes[i]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].field == Some(field))
    }

    /// All nodes of the subtree rooted at `i`, in preorder.
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Renders the kind structure as an s-expression (handy in tests).
    pub fn sexp(&self, i: usize) -> String {
        let n = &self.nodes[i];
        if n.children.is_empty() {
            return format!("({})", n.kind);
        }
        let inner: Vec<String> = n.children.iter().map(|&c| self.sexp(c)).collect();
        format!("({} {})", n.kind, inner.join(" "))
    }
}

thread_local! {
    static PYTHON: RefCell<Parser> = RefCell::new(new_parser(Language::Python));
    static JAVA: RefCell<Parser> = RefCell::new(new_parser(Language::Java));
}

fn new_parser(language: Language) -> Parser {
    let mut p = Parser::new();
    let lang: tree_sitter::Language = match language {
        Language::Python => tree_sitter_python::LANGUAGE.into(),
        Language::Java => tree_sitter_java::LANGUAGE.into(),
    };
    p.set_language(&lang).expect("grammar ABI matches tree-sitter");
    p
}

/// Parses `code`. Malformed input yields a flat fallback tree; only the size
/// guard can fail.
pub fn parse(code: &str, language: Language) -> Result<SyntaxTree> {
    let parsed = match language {
        Language::Python => PYTHON.with(|p| p.borrow_mut().parse(code, None)),
        Language::Java => JAVA.with(|p| p.borrow_mut().parse(code, None)),
    };
    match parsed {
        Some(tree) if !tree.root_node().has_error() => convert(&tree, code, language),
        _ => fallback_tree(code, language),
    }
}

// Grammar kind and field names live as long as the tree; they form a small
// fixed set, so keep one 'static copy of each.
fn intern(s: &str) -> &'static str {
    static NAMES: OnceLock<Mutex<HashSet<&'static str>>> = OnceLock::new();
    let mut names = NAMES.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    if let Some(&n) = names.get(s) {
        return n;
    }
    let n: &'static str = Box::leak(s.to_owned().into_boxed_str());
    names.insert(n);
    n
}

fn too_large(nodes: usize) -> Error {
    Error::SnippetTooLarge {
        nodes,
        limit: MAX_NODES,
    }
}

fn convert(tree: &tree_sitter::Tree, code: &str, language: Language) -> Result<SyntaxTree> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut cursor = tree.walk();
    // Named node that owns the children at each cursor depth.
    let mut owners: Vec<Option<usize>> = Vec::new();
    loop {
        let node = cursor.node();
        let parent = owners.last().copied().flatten();
        let mut owner = parent;
        if node.is_named() && !node.is_extra() || parent.is_none() {
            if nodes.len() == MAX_NODES {
                return Err(too_large(tree.root_node().descendant_count()));
            }
            let id = nodes.len();
            nodes.push(Node {
                kind: intern(node.kind()),
                field: cursor.field_name().map(intern),
                start: node.start_byte(),
                end: node.end_byte(),
                children: Vec::new(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            owner = Some(id);
        }
        if cursor.goto_first_child() {
            owners.push(owner);
            continue;
        }
        loop {
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return Ok(SyntaxTree {
                    language,
                    source: code.to_string(),
                    nodes,
                    fallback: false,
                });
            }
            owners.pop();
        }
    }
}

fn fallback_tree(code: &str, language: Language) -> Result<SyntaxTree> {
    let tokens = lex(code, Some(language));
    if tokens.len() + 1 > MAX_NODES {
        return Err(too_large(tokens.len() + 1));
    }
    let mut nodes = vec![Node {
        kind: FALLBACK_ROOT,
        field: None,
        start: 0,
        end: code.len(),
        children: (1..=tokens.len()).collect(),
    }];
    nodes.extend(tokens.iter().map(|t| Node {
        kind: t.kind.label(),
        field: None,
        start: t.start,
        end: t.start + t.text.len(),
        children: Vec::new(),
    }));
    Ok(SyntaxTree {
        language,
        source: code.to_string(),
        nodes,
        fallback: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_assignment() {
        let t = parse("x = 1", Language::Python).unwrap();
        assert!(!t.fallback);
        assert_eq!(t.sexp(0), "(module (expression_statement (assignment (identifier) (integer))))");
        let assign = (0..t.len()).find(|&i| t.node(i).kind == "assignment").unwrap();
        let left = t.child_by_field(assign, "left").unwrap();
        assert_eq!(t.text(left), "x");
    }

    #[test]
    fn broken_snippet_falls_back() {
        let t = parse("def f(:\n  return ]", Language::Python).unwrap();
        assert!(t.fallback);
        assert_eq!(t.node(0).kind, FALLBACK_ROOT);
        assert_eq!(t.len(), 1 + lex("def f(:\n  return ]", Some(Language::Python)).len());
    }

    #[test]
    fn empty_text_is_single_root() {
        for lang in [Language::Python, Language::Java] {
            let t = parse("", lang).unwrap();
            assert_eq!(t.len(), 1);
            assert!(t.children(0).is_empty());
        }
    }

    #[test]
    fn java_parses() {
        let t = parse("class A { int f(int a) { return a; } }", Language::Java).unwrap();
        assert!(!t.fallback);
        assert_eq!(t.node(0).kind, "program");
    }

    #[test]
    fn size_guard() {
        let big: String = (0..2000).map(|i| format!("x{i} = {i}\n")).collect();
        assert!(matches!(parse(&big, Language::Python), Err(Error::SnippetTooLarge { .. })));
    }

    #[test]
    fn preorder_numbering() {
        let t = parse("def f(a):\n    return [b for b in a]\n", Language::Python).unwrap();
        for (i, n) in t.nodes.iter().enumerate() {
            assert!(n.children.iter().all(|&c| c > i));
        }
        assert_eq!(t.descendants(0).len(), t.len());
    }
}
