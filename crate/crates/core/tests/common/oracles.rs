//! Independent reference implementations used to check the library.

use std::collections::{BTreeMap, HashMap, VecDeque};

// ---------------------------------------------------------------- n-grams

fn grams(toks: &[&str], n: usize) -> BTreeMap<Vec<String>, usize> {
    let mut m = BTreeMap::new();
    let mut i = 0;
    while i + n <= toks.len() {
        let g: Vec<String> = toks[i..i + n].iter().map(|s| s.to_string()).collect();
        *m.entry(g).or_insert(0) += 1;
        i += 1;
    }
    m
}

/// Textbook sentence BLEU-4: clipped precisions, add-one smoothing from
/// bigrams up, brevity penalty against the single reference.
pub fn ref_bleu(hyp: &[&str], reference: &[&str]) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut precisions = Vec::new();
    for n in 1..=4 {
        let h = grams(hyp, n);
        let r = grams(reference, n);
        let mut clipped = 0usize;
        let mut total = 0usize;
        for (g, c) in &h {
            total += c;
            clipped += (*c).min(*r.get(g).unwrap_or(&0));
        }
        if n == 1 {
            if clipped == 0 {
                return 0.0;
            }
            precisions.push(clipped as f64 / total as f64);
        } else {
            precisions.push((clipped as f64 + 1.0) / (total as f64 + 1.0));
        }
    }
    let geo = precisions.iter().map(|p| p.ln() * 0.25).sum::<f64>().exp();
    let c = hyp.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * geo
}

/// ROUGE-L F1 from a full LCS table.
pub fn ref_rouge_l(hyp: &[&str], reference: &[&str]) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let (n, m) = (hyp.len(), reference.len());
    let mut t = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            t[i][j] = if hyp[i] == reference[j] {
                t[i + 1][j + 1] + 1
            } else {
                t[i + 1][j].max(t[i][j + 1])
            };
        }
    }
    let l = t[0][0] as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / n as f64;
    let r = l / m as f64;
    2.0 * p * r / (p + r)
}

// ---------------------------------------------------------------- strings

/// Exponential recursion straight from the definition.
pub fn naive_levenshtein(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                naive_levenshtein(ra, rb)
            } else {
                1 + naive_levenshtein(ra, b)
                    .min(naive_levenshtein(a, rb))
                    .min(naive_levenshtein(ra, rb))
            }
        }
    }
}

/// All strings over `alphabet` of length `0..=max_len`.
pub fn all_strings(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &c in alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Visits every string `b` over `alphabet` up to `max_len` by walking the
/// trie of `b`s, extending the column `D[i] = lev(a[..i], b)` one character
/// at a time. Calls `visit(b, lev(a, b))` for each.
pub fn trie_distances(a: &[u8], alphabet: &[u8], max_len: usize, visit: &mut dyn FnMut(&[u8], usize)) {
    fn walk(a: &[u8], alphabet: &[u8], left: usize, b: &mut Vec<u8>, col: &[usize], visit: &mut dyn FnMut(&[u8], usize)) {
        visit(b, col[a.len()]);
        if left == 0 {
            return;
        }
        for &c in alphabet {
            let mut next = vec![0; col.len()];
            next[0] = b.len() + 1;
            for i in 1..=a.len() {
                let keep = col[i - 1] + usize::from(a[i - 1] != c);
                next[i] = keep.min(col[i] + 1).min(next[i - 1] + 1);
            }
            b.push(c);
            walk(a, alphabet, left - 1, b, &next, visit);
            b.pop();
        }
    }
    let col: Vec<usize> = (0..=a.len()).collect();
    walk(a, alphabet, max_len, &mut Vec::new(), &col, visit);
}

// ---------------------------------------------------------------- trees

/// Labeled ordered forest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    pub label: u8,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }
}

fn forest_size(f: &[Tree]) -> usize {
    f.iter().map(Tree::size).sum()
}

/// Every forest with exactly `n` nodes over `labels`.
pub fn forests(n: usize, labels: &[u8]) -> Vec<Vec<Tree>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    // First tree has a root plus `k` descendants; the rest is a forest.
    for k in 0..n {
        for kids in forests(k, labels) {
            for rest in forests(n - 1 - k, labels) {
                for &l in labels {
                    let mut f = vec![Tree {
                        label: l,
                        children: kids.clone(),
                    }];
                    f.extend(rest.iter().cloned());
                    out.push(f);
                }
            }
        }
    }
    out
}

// Forests reachable by deleting one node (its children take its place) or by
// relabeling one node.
fn neighbours(f: &[Tree], labels: &[u8], out: &mut Vec<Vec<Tree>>) {
    for i in 0..f.len() {
        // Delete root i.
        let mut del = f[..i].to_vec();
        del.extend(f[i].children.iter().cloned());
        del.extend(f[i + 1..].iter().cloned());
        out.push(del);
        // Relabel root i.
        for &l in labels {
            if l != f[i].label {
                let mut g = f.to_vec();
                g[i].label = l;
                out.push(g);
            }
        }
        // Edits inside the subtree of root i.
        let mut inner = Vec::new();
        neighbours(&f[i].children, labels, &mut inner);
        for kids in inner {
            let mut g = f.to_vec();
            g[i].children = kids;
            out.push(g);
        }
    }
}

/// Shortest edit scripts between all forests of at most `max_nodes` nodes,
/// found by breadth-first search over the graph of single edits. Inserting
/// is the reverse of deleting, so the graph is undirected.
pub struct ForestGraph {
    pub forests: Vec<Vec<Tree>>,
    index: HashMap<Vec<Tree>, usize>,
    adj: Vec<Vec<usize>>,
}

impl ForestGraph {
    pub fn new(max_nodes: usize, labels: &[u8]) -> Self {
        let forests: Vec<Vec<Tree>> = (0..=max_nodes).flat_map(|n| forests(n, labels)).collect();
        let index: HashMap<Vec<Tree>, usize> = forests.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        let mut adj = vec![Vec::new(); forests.len()];
        for (i, f) in forests.iter().enumerate() {
            let mut ns = Vec::new();
            neighbours(f, labels, &mut ns);
            for g in ns {
                debug_assert!(forest_size(&g) <= max_nodes);
                let j = index[&g];
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        ForestGraph { forests, index, adj }
    }

    pub fn id(&self, f: &[Tree]) -> usize {
        self.index[f]
    }

    /// Edit distances from one forest to every forest in the graph.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.forests.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}
