//! AMR graphs: PENMAN parsing, linearization and document-level merging.

mod blocks;
mod linearize;
mod merge;
mod penman;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blocks::{parse_blocks, AmrBlock};
pub use linearize::{linearize, LinearizeOptions};
pub use merge::{merge_graphs, MULTI_SENTENCE};
pub use penman::{parse_penman, to_penman};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// Introduced with `(var / concept ...)`.
    Variable,
    /// A bare constant such as `-`, `2008` or `imperative`.
    Constant,
    /// A string constant such as `"Russia"`.
    Quoted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub concept: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_constant(&self) -> bool {
        self.kind != NodeKind::Variable
    }
}

/// A directed, labelled edge between two node indices. The role is stored
/// without its leading colon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub role: String,
    pub target: usize,
}

/// A rooted, labelled, directed graph of AMR concepts.
///
/// Node ids are unique and every edge endpoint is a node. Reachability from
/// the root is not enforced here; [`AmrGraph::unreachable`] reports it and the
/// parser guarantees it for its own output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct AmrGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: usize,
    index: HashMap<String, usize>,
}

impl AmrGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, root: usize) -> Result<Self> {
        if root >= nodes.len() {
            return Err(Error::invalid(format!("root index {root} out of range")));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate node id {:?}", n.id)));
            }
        }
        if let Some(e) = edges.iter().find(|e| e.source >= nodes.len() || e.target >= nodes.len()) {
            return Err(Error::invalid(format!("edge endpoint out of range: {e:?}")));
        }
        Ok(Self { nodes, edges, root, index })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_node(&self) -> &Node {
        &self.nodes[self.root]
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Outgoing edges of `node`, in edge order.
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.source == node)
    }

    /// Shortest directed distance from the root for every node, `None` if
    /// unreachable.
    pub fn depths(&self) -> Vec<Option<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push(e.target);
        }
        let mut depth = vec![None; self.nodes.len()];
        depth[self.root] = Some(0);
        let mut queue = VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            let d = depth[n].unwrap_or(0);
            for &m in &adj[n] {
                if depth[m].is_none() {
                    depth[m] = Some(d + 1);
                    queue.push_back(m);
                }
            }
        }
        depth
    }

    /// Ids of nodes not reachable from the root, in node order.
    pub fn unreachable(&self) -> Vec<String> {
        self.depths()
            .iter()
            .zip(&self.nodes)
            .filter(|(d, _)| d.is_none())
            .map(|(_, n)| n.id.clone())
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.depths().iter().all(Option::is_some)
    }

    /// The subgraph induced by `keep` (node indices of `self`), rooted at
    /// `self`'s root, which must be in `keep`. Node and edge order follow
    /// `self`.
    pub fn induced(&self, keep: &BTreeSet<usize>) -> Result<AmrGraph> {
        if !keep.contains(&self.root) {
            return Err(Error::invalid("induced subgraph must contain the root"));
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::with_capacity(keep.len());
        for &i in keep {
            remap[i] = nodes.len();
            nodes.push(self.nodes[i].clone());
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.source) && keep.contains(&e.target))
            .map(|e| Edge { source: remap[e.source], role: e.role.clone(), target: remap[e.target] })
            .collect();
        AmrGraph::new(nodes, edges, remap[self.root])
    }

    /// Multiset of concept labels, sorted.
    pub fn concept_multiset(&self) -> Vec<String> {
        let mut c: Vec<String> = self.nodes.iter().map(|n| n.concept.clone()).collect();
        c.sort();
        c
    }

    /// Edges as sorted `(source concept, role, target concept)` triples.
    pub fn edge_label_multiset(&self) -> Vec<(String, String, String)> {
        let mut e: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                (self.nodes[e.source].concept.clone(), e.role.clone(), self.nodes[e.target].concept.clone())
            })
            .collect();
        e.sort();
        e
    }
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: usize,
}

impl TryFrom<RawGraph> for AmrGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        AmrGraph::new(raw.nodes, raw.edges, raw.root)
    }
}

impl From<AmrGraph> for RawGraph {
    fn from(g: AmrGraph) -> Self {
        RawGraph { nodes: g.nodes, edges: g.edges, root: g.root }
    }
}
