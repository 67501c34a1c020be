//! Zhang–Shasha ordered tree edit distance with unit costs.

use std::collections::HashMap;

use super::syntax::SyntaxTree;

/// A tree flattened to postorder with leftmost-leaf descendants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostorderTree<L> {
    labels: Vec<L>,
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<L> PostorderTree<L> {
    /// Flattens the tree rooted at `root`. `children(i)` lists the children
    /// of node `i` in order; `label(i)` gives its label.
    pub fn new<C, F>(root: usize, mut children: C, mut label: F) -> Self
    where
        C: FnMut(usize) -> Vec<usize>,
        F: FnMut(usize) -> L,
    {
        let mut labels = Vec::new();
        let mut lml = Vec::new();
        // (node, children, next child, postorder index of first leaf)
        let mut stack: Vec<(usize, Vec<usize>, usize, Option<usize>)> = vec![(root, children(root), 0, None)];
        while let Some(top) = stack.last_mut() {
            if top.2 < top.1.len() {
                let c = top.1[top.2];
                top.2 += 1;
                let kids = children(c);
                stack.push((c, kids, 0, None));
                continue;
            }
            let (node, _, _, first) = stack.pop().unwrap();
            let me = labels.len();
            let leftmost = first.unwrap_or(me);
            labels.push(label(node));
            lml.push(leftmost);
            if let Some(parent) = stack.last_mut() {
                parent.3.get_or_insert(leftmost);
            }
        }
        let mut last_with_lml: HashMap<usize, usize> = HashMap::new();
        for (i, &l) in lml.iter().enumerate() {
            last_with_lml.insert(l, i);
        }
        let mut keyroots: Vec<usize> = last_with_lml.into_values().collect();
        keyroots.sort_unstable();
        PostorderTree { labels, lml, keyroots }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }
}

/// Unit-cost edit distance (insert, delete, relabel).
pub fn zhang_shasha<L: PartialEq>(a: &PostorderTree<L>, b: &PostorderTree<L>) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return n.max(m);
    }
    let mut td = vec![0u32; n * m];
    let mut fd = vec![0u32; (n + 1) * (m + 1)];
    let w = m + 1;
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let (li, lj) = (a.lml[i], b.lml[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            fd[0] = 0;
            for dx in 1..rows {
                fd[dx * w] = dx as u32;
            }
            for (dy, cell) in fd.iter_mut().enumerate().take(cols).skip(1) {
                *cell = dy as u32;
            }
            for x in li..=i {
                let dx = x - li + 1;
                for y in lj..=j {
                    let dy = y - lj + 1;
                    let del = fd[(dx - 1) * w + dy] + 1;
                    let ins = fd[dx * w + dy - 1] + 1;
                    let v = if a.lml[x] == li && b.lml[y] == lj {
                        let sub = fd[(dx - 1) * w + dy - 1] + u32::from(a.labels[x] != b.labels[y]);
                        let v = del.min(ins).min(sub);
                        td[x * m + y] = v;
                        v
                    } else {
                        let px = a.lml[x] - li;
                        let py = b.lml[y] - lj;
                        del.min(ins).min(fd[px * w + py] + td[x * m + y])
                    };
                    fd[dx * w + dy] = v;
                }
            }
        }
    }
    td[(n - 1) * m + (m - 1)] as usize
}

/// Which text labels a syntax node for tree edit distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TedLabels {
    /// Node kind only.
    #[default]
    Kind,
    /// Node kind, plus the source text on leaves.
    Full,
}

impl std::str::FromStr for TedLabels {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "kind" => Ok(TedLabels::Kind),
            "full" => Ok(TedLabels::Full),
            other => Err(crate::error::Error::invalid(format!(
                "unknown ted labels '{other}' (expected kind or full)"
            ))),
        }
    }
}

pub(crate) fn syntax_postorder(t: &SyntaxTree, labels: TedLabels) -> PostorderTree<String> {
    PostorderTree::new(
        t.root(),
        |i| t.children(i).to_vec(),
        |i| match labels {
            TedLabels::Full if t.children(i).is_empty() => format!("{}:{}", t.node(i).kind, t.text(i)),
            _ => t.node(i).kind.to_string(),
        },
    )
}

/// Raw edit distance between two syntax trees.
pub fn raw_tree_edit_distance(a: &SyntaxTree, b: &SyntaxTree, labels: TedLabels) -> usize {
    zhang_shasha(&syntax_postorder(a, labels), &syntax_postorder(b, labels))
}
