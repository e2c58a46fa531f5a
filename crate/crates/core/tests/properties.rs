use amrsum_core::amr::{merge_graphs, to_penman, AmrGraph, Edge, Node, NodeKind, MULTI_SENTENCE};
use amrsum_core::metrics::{bleu, rouge_l, rouge_n, MetricReport};
use amrsum_core::ngram::{lambdas_from_theta, NGramModel};
use amrsum_core::{fused_score, lcs_length, linearize, parse_penman, LinearizeOptions, TokenSeq};
use proptest::prelude::*;

const CONCEPTS: [&str; 5] = ["want-01", "boy", "go-02", "girl", "see-01"];

/// Random rooted graphs: a spanning tree over `n` nodes plus a few extra
/// (possibly re-entrant or cyclic) edges.
fn graph() -> impl Strategy<Value = AmrGraph> {
    (1usize..8)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(0usize..CONCEPTS.len(), n),
                prop::collection::vec(any::<prop::sample::Index>(), n),
                prop::collection::vec((0..n, 0..n, 0usize..3), 0..4),
            )
        })
        .prop_map(|(n, concepts, parents, extra)| {
            let nodes = (0..n).map(|i| Node { id: format!("v{i}"), concept: CONCEPTS[concepts[i]].into(), kind: NodeKind::Variable }).collect();
            let mut edges: Vec<Edge> =
                (1..n).map(|i| Edge { source: parents[i].index(i), role: format!("ARG{}", i % 3), target: i }).collect();
            edges.extend(extra.into_iter().filter(|(s, t, _)| s != t).map(|(s, t, r)| Edge { source: s, role: format!("op{r}"), target: t }));
            AmrGraph::new(nodes, edges, 0).unwrap()
        })
}

fn tokens(max_len: usize) -> impl Strategy<Value = TokenSeq> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..max_len)
        .prop_map(|v| TokenSeq::new(v.into_iter().map(String::from).collect()).unwrap())
}

fn nonempty_tokens(max_len: usize) -> impl Strategy<Value = TokenSeq> {
    tokens(max_len).prop_filter("non-empty", |t| !t.is_empty())
}

proptest! {
    #[test]
    fn linearization_is_balanced_and_deterministic(g in graph(), depth in 0usize..3) {
        let opts = LinearizeOptions { max_reentrancy_depth: depth, ..LinearizeOptions::default() };
        let out = linearize(&g, &opts).unwrap();
        let mut open = 0i64;
        for t in out.iter() {
            match t.as_str() {
                "(" => open += 1,
                ")" => { open -= 1; prop_assert!(open >= 0); }
                _ => {}
            }
        }
        prop_assert_eq!(open, 0);
        prop_assert_eq!(out.first().map(String::as_str), Some("("));
        prop_assert_eq!(out, linearize(&g, &opts).unwrap());
    }

    #[test]
    fn tree_linearization_length(g in graph()) {
        // without re-entrancy every node is emitted once as `( concept … )`
        let targets: std::collections::HashSet<usize> = g.edges().iter().map(|e| e.target).collect();
        prop_assume!(targets.len() == g.edges().len() && !targets.contains(&g.root()));
        let out = linearize(&g, &LinearizeOptions::default()).unwrap();
        prop_assert_eq!(out.len(), 3 * g.len() + g.edges().len());
    }

    #[test]
    fn penman_round_trip(g in graph()) {
        let back = parse_penman(&to_penman(&g)).unwrap();
        prop_assert_eq!(back.concept_multiset(), g.concept_multiset());
        prop_assert_eq!(back.edge_label_multiset(), g.edge_label_multiset());
        prop_assert_eq!(linearize(&back, &LinearizeOptions::verbatim()).unwrap(), linearize(&g, &LinearizeOptions::verbatim()).unwrap());
    }

    #[test]
    fn merged_graph_covers_inputs(gs in prop::collection::vec(graph(), 1..4)) {
        let m = merge_graphs(&gs).unwrap();
        prop_assert!(m.is_connected());
        prop_assert_eq!(&m.root_node().concept, MULTI_SENTENCE);
        let mut want: Vec<String> = gs.iter().flat_map(|g| g.concept_multiset()).collect();
        want.sort();
        want.dedup();
        let mut got: Vec<String> = m.concept_multiset().into_iter().filter(|c| c != MULTI_SENTENCE).collect();
        got.sort();
        prop_assert_eq!(got, want);
        prop_assert!(m.edges().len() <= gs.iter().map(|g| g.edges().len()).sum::<usize>() + gs.len());
    }

    #[test]
    fn lcs_properties(a in tokens(10), b in tokens(10), c in tokens(4)) {
        let l = lcs_length(a.tokens(), b.tokens());
        prop_assert_eq!(l, lcs_length(b.tokens(), a.tokens()));
        prop_assert!(l <= a.len().min(b.len()));
        prop_assert_eq!(lcs_length(a.tokens(), a.tokens()), a.len());
        let mut ac = a.tokens().to_vec();
        ac.extend(c.iter().cloned());
        prop_assert!(lcs_length(&ac, b.tokens()) >= l);
        prop_assert!(lcs_length(&ac, b.tokens()) <= l + c.len());
    }

    #[test]
    fn side_probabilities_are_bounded(
        corpus in prop::collection::vec(nonempty_tokens(6), 1..5),
        hist in tokens(5),
        theta in 0.1f64..10.0,
    ) {
        let lm = NGramModel::from_sentences(&corpus, 4).unwrap();
        let w = lambdas_from_theta(theta).unwrap();
        let total: f64 = lm.vocab().iter().map(|t| lm.p_side(t, hist.tokens(), &w)).sum();
        prop_assert!(total <= 1.0 + 1e-9);
        for t in lm.vocab() {
            let p = lm.p_side(t, hist.tokens(), &w);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn fusion_is_monotone(a in 1e-6f64..1.0, b1 in 0.0f64..1.0, b2 in 0.0f64..1.0, psi in 0.0f64..=1.0) {
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(fused_score(a, lo, psi) <= fused_score(a, hi, psi));
        prop_assert!(fused_score(a, lo, psi) >= a.ln());
        prop_assert!(fused_score(a, hi, psi.min(0.5)) <= fused_score(a, hi, psi.max(0.5)));
    }

    #[test]
    fn metrics_are_bounded(h in tokens(8), r in tokens(8)) {
        for n in 1..=3 {
            let p = rouge_n(&h, &r, n);
            for x in [p.precision, p.recall, p.f1] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
        let l = rouge_l(&h, &r);
        prop_assert!((0.0..=1.0).contains(&l.f1));
        let b = bleu(&[h.clone()], &[r.clone()]).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
    }

    #[test]
    fn bleu_ignores_pair_order(pairs in prop::collection::vec((nonempty_tokens(7), nonempty_tokens(7)), 1..6)) {
        let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let (hr, rr): (Vec<_>, Vec<_>) = pairs.iter().rev().cloned().unzip();
        let (a, b) = (bleu(&h, &r).unwrap(), bleu(&hr, &rr).unwrap());
        prop_assert!((a - b).abs() <= 1e-12);
        let (ma, mb) = (MetricReport::compute(&h, &r).unwrap(), MetricReport::compute(&hr, &rr).unwrap());
        prop_assert!((ma.rouge2.f1 - mb.rouge2.f1).abs() <= 1e-12);
    }
}
