//! Property tests for the metric, ranking and pooling invariants.

mod common;

use common::oracles::{naive_levenshtein, Tree};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reco_core::corpus::Language;
use reco_core::dense::{augment_representation, similarity, DenseIndex, EmbeddingVector};
use reco_core::sparse::{build_augmented_query, index_corpus, AugmentedText, Bm25Params, TokenizerOptions};
use reco_core::style::{cssim, levenshtein, zhang_shasha, IdentifierSet, IdfTable, PostorderTree, Role, StyleIdf};

fn tree_strategy() -> impl Strategy<Value = Tree> {
    let leaf = (0u8..3).prop_map(|label| Tree {
        label,
        children: Vec::new(),
    });
    leaf.prop_recursive(3, 12, 3, |inner| {
        ((0u8..3), prop::collection::vec(inner, 0..3)).prop_map(|(label, children)| Tree { label, children })
    })
}

fn postorder(t: &Tree) -> PostorderTree<u8> {
    let mut nodes = Vec::new();
    let mut kids = Vec::new();
    fn walk<'a>(t: &'a Tree, nodes: &mut Vec<&'a Tree>, kids: &mut Vec<Vec<usize>>) -> usize {
        let id = nodes.len();
        nodes.push(t);
        kids.push(Vec::new());
        for c in &t.children {
            let k = walk(c, nodes, kids);
            kids[id].push(k);
        }
        id
    }
    walk(t, &mut nodes, &mut kids);
    PostorderTree::new(0, |i| kids[i].clone(), |i| nodes[i].label)
}

fn ted(a: &Tree, b: &Tree) -> usize {
    zhang_shasha(&postorder(a), &postorder(b))
}

fn unit_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn docs(texts: &[String]) -> Vec<AugmentedText> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| build_augmented_query(format!("doc{i}"), t, &[] as &[&str]))
        .collect()
}

const WORDS: &[&str] = &["sort", "list", "matrix", "sum", "row", "count", "word", "string", "reverse", "max"];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 1..8).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn levenshtein_is_a_metric(a in "[ab]{0,7}", b in "[ab]{0,7}", c in "[ab]{0,7}") {
        let (a, b, c) = (a.as_bytes(), b.as_bytes(), c.as_bytes());
        let ab = levenshtein(a, b);
        prop_assert_eq!(ab, naive_levenshtein(a, b));
        prop_assert_eq!(levenshtein(a, a), 0);
        prop_assert_eq!(ab, levenshtein(b, a));
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(levenshtein(a, c) <= ab + levenshtein(b, c));
    }

    #[test]
    fn tree_edit_distance_is_a_metric(a in tree_strategy(), b in tree_strategy(), c in tree_strategy()) {
        let ab = ted(&a, &b);
        prop_assert_eq!(ted(&a, &a), 0);
        prop_assert_eq!(ab, ted(&b, &a));
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(ted(&a, &c) <= ab + ted(&b, &c));
        // Delete all of a, insert all of b. max(|a|, |b|) is not a bound:
        // relabels cannot change shape.
        prop_assert!(ab <= a.size() + b.size());
        prop_assert!(ab >= a.size().abs_diff(b.size()));
    }

    #[test]
    fn bm25_score_grows_with_term_frequency(rest in prop::collection::vec(sentence(), 1..6), extra in 1usize..5) {
        // "needle" appears once in one doc and 1+extra times in another of equal length.
        let filler = "pad ".repeat(extra);
        let mut texts = rest.clone();
        texts.push(format!("needle {filler}"));
        texts.push("needle ".repeat(extra + 1));
        let idx = index_corpus(&docs(&texts), Bm25Params::default(), TokenizerOptions::default()).unwrap();
        let s = idx.score_all("needle");
        let n = texts.len();
        prop_assert!(s[n - 1] > s[n - 2], "{} vs {}", s[n - 1], s[n - 2]);
    }

    #[test]
    fn repeating_the_query_keeps_the_ranking(corpus in prop::collection::vec(sentence(), 2..10), q in sentence(), reps in prop::sample::select(vec![1usize, 2, 4])) {
        // Powers of two keep the scaled sums exact, so exact ties survive.
        let idx = index_corpus(&docs(&corpus), Bm25Params::default(), TokenizerOptions::default()).unwrap();
        let once = idx.search(&build_augmented_query("q", &q, &[] as &[&str]), corpus.len());
        let repeated = vec![q.clone(); reps];
        let many = idx.search(&build_augmented_query("q", &q, &repeated), corpus.len());
        let ids = |r: &[(String, f64)]| r.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&once), ids(&many));
        for ((_, a), (_, b)) in once.iter().zip(&many) {
            prop_assert!((b - a * (2 * reps) as f64).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn dense_ranking_ignores_query_scale(rows in prop::collection::vec(unit_vec(4), 1..8), q in unit_vec(4), alpha in 0.01f64..100.0) {
        let vecs: Vec<EmbeddingVector> = rows.into_iter().map(|v| EmbeddingVector::normalized(v).unwrap()).collect();
        let ids = (0..vecs.len()).map(|i| format!("c{i}")).collect();
        let index = DenseIndex::build(ids, &vecs).unwrap();
        let q = EmbeddingVector::new(q).unwrap();
        let a = index.search(&q, vecs.len()).unwrap();
        let b = index.search(&q.scaled(alpha), vecs.len()).unwrap();
        // Order may differ only among scores tied within rounding.
        for ((ia, sa), (ib, sb)) in a.iter().zip(&b) {
            prop_assert!((sa * alpha - sb).abs() < 1e-9 * (1.0 + sb.abs()));
            if ia != ib {
                prop_assert!((sa - a.iter().find(|(i, _)| i == ib).unwrap().1).abs() < 1e-12);
            }
        }
        let sim = similarity(&q.scaled(alpha), &vecs[0]).unwrap();
        prop_assert!((sim - alpha * similarity(&q, &vecs[0]).unwrap()).abs() < 1e-9 * (1.0 + sim.abs()));
    }

    #[test]
    fn pooling_ignores_generation_order(q in unit_vec(5), gens in prop::collection::vec(unit_vec(5), 1..6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let q = EmbeddingVector::new(q).unwrap();
        let gens: Vec<EmbeddingVector> = gens.into_iter().map(|v| EmbeddingVector::new(v).unwrap()).collect();
        let mut shuffled = gens.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = augment_representation(&q, &gens).unwrap();
        let b = augment_representation(&q, &shuffled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        // Fixed point.
        let same = vec![q.clone(); gens.len()];
        let c = augment_representation(&q, &same).unwrap();
        for (x, y) in c.values().iter().zip(q.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn idf_weight_is_non_increasing_in_doc_freq(n_docs in 1usize..40, df_a in 0usize..40, df_b in 0usize..40) {
        let (lo, hi) = (df_a.min(df_b).min(n_docs), df_a.max(df_b).min(n_docs));
        let sets: Vec<IdentifierSet> = (0..n_docs)
            .map(|i| {
                let mut names = vec!["filler"];
                if i < lo { names.push("lo"); }
                if i < hi { names.push("hi"); }
                IdentifierSet::from_names(Role::Variable, names)
            })
            .collect();
        let idf = IdfTable::from_sets(&sets).unwrap();
        prop_assert!(idf.weight("hi") <= idf.weight("lo"));
        prop_assert!(idf.weight("filler") >= 1.0 - 1e-12);
        prop_assert!(idf.weight("absent") >= idf.weight("lo"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn cssim_stays_in_bounds(seed in any::<u64>(), java in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lang = if java { Language::Java } else { Language::Python };
        let a = common::random_snippet(&mut rng, lang);
        let b = common::random_snippet(&mut rng, lang);
        let idf = StyleIdf::from_codes(&[a.clone(), b.clone()], lang).unwrap();
        let r = cssim(&a, &b, lang, &idf).unwrap();
        for part in [r.dis_var, r.dis_api, r.ted, r.csdis, r.cssim] {
            prop_assert!((0.0..=1.0).contains(&part), "{part} out of range for {r:?}");
        }
        prop_assert!((r.cssim + r.csdis - 1.0).abs() < 1e-12);
        let back = cssim(&b, &a, lang, &idf).unwrap();
        prop_assert!((back.cssim - r.cssim).abs() < 1e-12);
        prop_assert_eq!(cssim(&a, &a, lang, &idf).unwrap().cssim, 1.0);
    }
}
