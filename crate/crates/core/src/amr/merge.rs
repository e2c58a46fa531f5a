use std::collections::{HashMap, HashSet};

use super::{AmrGraph, Edge, Node, NodeKind};
use crate::error::{Error, Result};

/// Concept of the synthetic root added by [`merge_graphs`].
pub const MULTI_SENTENCE: &str = "multi-sentence";

/// Merges sentence graphs into one document graph.
///
/// Nodes with the same concept label are collapsed into one (the first-seen
/// node keeps its id, made unique across graphs if needed), edges are
/// re-targeted and deduplicated, and a `multi-sentence` root links to every
/// sentence root through `:snt1`, `:snt2`, ...
pub fn merge_graphs(graphs: &[AmrGraph]) -> Result<AmrGraph> {
    if graphs.is_empty() {
        return Err(Error::invalid("merge_graphs needs at least one graph"));
    }
    let mut used_ids: HashSet<String> = HashSet::new();
    let mut unique_id = |base: &str| -> String {
        if used_ids.insert(base.to_owned()) {
            return base.to_owned();
        }
        (1..)
            .map(|i| format!("{base}~{i}"))
            .find(|c| used_ids.insert(c.clone()))
            .expect("unbounded id search")
    };

    let root_id = unique_id("m0");
    let mut nodes = vec![Node { id: root_id, concept: MULTI_SENTENCE.to_owned(), kind: NodeKind::Variable }];
    let mut by_concept: HashMap<&str, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut seen_edges = HashSet::new();

    for (gi, g) in graphs.iter().enumerate() {
        let mut remap = Vec::with_capacity(g.len());
        for n in g.nodes() {
            let idx = *by_concept.entry(n.concept.as_str()).or_insert_with(|| {
                nodes.push(Node { id: unique_id(&n.id), concept: n.concept.clone(), kind: n.kind });
                nodes.len() - 1
            });
            remap.push(idx);
        }
        let mut push = |e: Edge| {
            if seen_edges.insert(e.clone()) {
                edges.push(e);
            }
        };
        push(Edge { source: 0, role: format!("snt{}", gi + 1), target: remap[g.root()] });
        for e in g.edges() {
            push(Edge { source: remap[e.source], role: e.role.clone(), target: remap[e.target] });
        }
    }
    AmrGraph::new(nodes, edges, 0)
}
