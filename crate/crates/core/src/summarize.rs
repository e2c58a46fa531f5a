//! Summary-subgraph extraction and the document → summary pipeline.
//!
//! A candidate summary is a node set containing the root of the merged
//! document graph, together with every edge among its nodes (the induced
//! subgraph), such that each node is reachable from the root inside the
//! subgraph. Its score is `Σ_v θ·f(v) + Σ_e ψ·f(e)` over those nodes and
//! edges. Greedy search grows the set one frontier node at a time; the
//! exhaustive search enumerates every candidate of small graphs.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::amr::{linearize, merge_graphs, AmrGraph, LinearizeOptions, NodeKind};
use crate::decode::{generate, FusionConfig, SideModel, StepModel};
use crate::error::{Error, Result, StageExt};
use crate::ngram::{build_counts, InterpolationWeights, SIDE_ORDER};
use crate::side_info::{oracle_side, select_side_sentences, SideDocument};
use crate::tokens::TokenSeq;

/// Largest graph the exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// Maps nodes and edges of (subgraphs of) a source graph to feature vectors.
pub trait Featurizer: Send + Sync {
    fn node_dim(&self) -> usize;
    fn edge_dim(&self) -> usize;
    fn node_features(&self, graph: &AmrGraph, node: usize) -> Result<Vec<f64>>;
    fn edge_features(&self, graph: &AmrGraph, edge: usize) -> Result<Vec<f64>>;
}

const CORE_ROLES: [&str; 5] = ["ARG0", "ARG1", "ARG2", "ARG3", "ARG4"];

/// Node features `(document frequency, depth, named-entity flag)` and edge
/// features `(one-hot over ARG0..ARG4, relation frequency)`, fitted on one
/// source graph and looked up by node id in its subgraphs.
#[derive(Debug, Clone)]
pub struct DefaultFeaturizer {
    nodes: HashMap<String, [f64; 3]>,
    role_freq: HashMap<String, f64>,
}

impl DefaultFeaturizer {
    /// `sentences` are the per-sentence graphs the source was merged from;
    /// document frequency is the fraction of them containing the concept and
    /// relation frequency the fraction of their edges carrying the role.
    pub fn fit(source: &AmrGraph, sentences: &[AmrGraph]) -> Self {
        let mut df: HashMap<&str, f64> = HashMap::new();
        let mut role_counts: HashMap<String, f64> = HashMap::new();
        let mut edge_total = 0.0;
        for g in sentences {
            let concepts: BTreeSet<&str> = g.nodes().iter().map(|n| n.concept.as_str()).collect();
            for c in concepts {
                *df.entry(c).or_insert(0.0) += 1.0;
            }
            for e in g.edges() {
                *role_counts.entry(e.role.clone()).or_insert(0.0) += 1.0;
                edge_total += 1.0;
            }
        }
        let docs = sentences.len().max(1) as f64;
        let depths = source.depths();
        let nodes = source
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let named = n.kind == NodeKind::Quoted
                    || n.concept == "name"
                    || source.out_edges(i).any(|e| e.role == "name");
                let feats = [
                    df.get(n.concept.as_str()).copied().unwrap_or(0.0) / docs,
                    depths[i].unwrap_or(0) as f64,
                    if named { 1.0 } else { 0.0 },
                ];
                (n.id.clone(), feats)
            })
            .collect();
        let role_freq = role_counts.into_iter().map(|(r, c)| (r, c / f64::max(edge_total, 1.0))).collect();
        Self { nodes, role_freq }
    }
}

impl Featurizer for DefaultFeaturizer {
    fn node_dim(&self) -> usize {
        3
    }

    fn edge_dim(&self) -> usize {
        CORE_ROLES.len() + 1
    }

    fn node_features(&self, graph: &AmrGraph, node: usize) -> Result<Vec<f64>> {
        let id = &graph.node(node).id;
        self.nodes
            .get(id)
            .map(|f| f.to_vec())
            .ok_or_else(|| Error::invalid(format!("node {id:?} is not part of the fitted source graph")))
    }

    fn edge_features(&self, graph: &AmrGraph, edge: usize) -> Result<Vec<f64>> {
        let role = &graph.edges()[edge].role;
        let mut f: Vec<f64> = CORE_ROLES.iter().map(|r| if r == role { 1.0 } else { 0.0 }).collect();
        f.push(self.role_freq.get(role).copied().unwrap_or(0.0));
        Ok(f)
    }
}

/// The linear objective over node and edge features plus a node budget.
pub struct SubgraphObjective {
    pub node_weights: Vec<f64>,
    pub edge_weights: Vec<f64>,
    pub featurizer: Box<dyn Featurizer>,
    pub budget: usize,
}

impl SubgraphObjective {
    pub fn new(node_weights: Vec<f64>, edge_weights: Vec<f64>, featurizer: Box<dyn Featurizer>, budget: usize) -> Result<Self> {
        if node_weights.len() != featurizer.node_dim() {
            return Err(Error::Dimension(format!(
                "{} node weights for {} node features",
                node_weights.len(),
                featurizer.node_dim()
            )));
        }
        if edge_weights.len() != featurizer.edge_dim() {
            return Err(Error::Dimension(format!(
                "{} edge weights for {} edge features",
                edge_weights.len(),
                featurizer.edge_dim()
            )));
        }
        if budget == 0 {
            return Err(Error::invalid("budget must be at least 1"));
        }
        Ok(Self { node_weights, edge_weights, featurizer, budget })
    }

    fn dot(weights: &[f64], feats: &[f64], what: &str) -> Result<f64> {
        if weights.len() != feats.len() {
            return Err(Error::Dimension(format!("{what}: {} weights, {} features", weights.len(), feats.len())));
        }
        Ok(weights.iter().zip(feats).map(|(w, f)| w * f).sum())
    }

    fn node_scores(&self, g: &AmrGraph) -> Result<Vec<f64>> {
        (0..g.len()).map(|i| Self::dot(&self.node_weights, &self.featurizer.node_features(g, i)?, "node")).collect()
    }

    fn edge_scores(&self, g: &AmrGraph) -> Result<Vec<f64>> {
        (0..g.edges().len()).map(|i| Self::dot(&self.edge_weights, &self.featurizer.edge_features(g, i)?, "edge")).collect()
    }
}

/// Budget of `ceil(fraction · nodes)`, at least 1.
pub fn proportional_budget(nodes: usize, fraction: f64) -> usize {
    ((nodes as f64 * fraction).ceil() as usize).max(1)
}

/// `Σ_v θ·f(v) + Σ_e ψ·f(e)` over all nodes and edges of `g`.
pub fn score_subgraph(obj: &SubgraphObjective, g: &AmrGraph) -> Result<f64> {
    Ok(obj.node_scores(g)?.iter().sum::<f64>() + obj.edge_scores(g)?.iter().sum::<f64>())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Greedy,
    Exhaustive,
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] nodes, greedy beyond.
    Auto,
}

struct Scores {
    node: Vec<f64>,
    /// (source, target, score) per edge
    edges: Vec<(usize, usize, f64)>,
    out: Vec<Vec<usize>>,
}

impl Scores {
    fn new(obj: &SubgraphObjective, g: &AmrGraph) -> Result<Self> {
        let node = obj.node_scores(g)?;
        let es = obj.edge_scores(g)?;
        let edges = g.edges().iter().zip(es).map(|(e, s)| (e.source, e.target, s)).collect();
        let mut out = vec![Vec::new(); g.len()];
        for e in g.edges() {
            out[e.source].push(e.target);
        }
        Ok(Self { node, edges, out })
    }

    /// Score change from adding `v` to `set`.
    fn gain(&self, set: &[bool], v: usize) -> f64 {
        let mut gain = self.node[v];
        for &(s, t, score) in &self.edges {
            let touches = (s == v && (set[t] || t == v)) || (t == v && set[s]);
            if touches {
                gain += score;
            }
        }
        gain
    }
}

fn greedy(scores: &Scores, root: usize, budget: usize) -> Vec<bool> {
    let n = scores.node.len();
    let mut set = vec![false; n];
    set[root] = true;
    let mut size = 1;
    while size < budget {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..n {
            if set[v] || !(0..n).any(|u| set[u] && scores.out[u].contains(&v)) {
                continue;
            }
            let g = scores.gain(&set, v);
            if best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) if g > 0.0 => {
                set[v] = true;
                size += 1;
            }
            _ => break,
        }
    }
    set
}

fn set_score(scores: &Scores, set: &[bool]) -> f64 {
    let nodes: f64 = scores.node.iter().zip(set).filter(|(_, &s)| s).map(|(x, _)| x).sum();
    let edges: f64 = scores.edges.iter().filter(|(s, t, _)| set[*s] && set[*t]).map(|e| e.2).sum();
    nodes + edges
}

/// Enumerates each root-reachable node set of size ≤ budget exactly once by
/// branching on the smallest undecided frontier node.
fn exhaustive(scores: &Scores, root: usize, budget: usize) -> Vec<bool> {
    fn recurse(scores: &Scores, set: &mut Vec<bool>, excluded: &mut Vec<bool>, size: usize, budget: usize, best: &mut (f64, Vec<bool>)) {
        let score = set_score(scores, set);
        if score > best.0 {
            *best = (score, set.clone());
        }
        if size == budget {
            return;
        }
        let n = set.len();
        let frontier: Vec<usize> = (0..n)
            .filter(|&v| !set[v] && !excluded[v] && (0..n).any(|u| set[u] && scores.out[u].contains(&v)))
            .collect();
        let mut newly_excluded = Vec::new();
        for v in frontier {
            set[v] = true;
            recurse(scores, set, excluded, size + 1, budget, best);
            set[v] = false;
            excluded[v] = true;
            newly_excluded.push(v);
        }
        for v in newly_excluded {
            excluded[v] = false;
        }
    }
    let n = scores.node.len();
    let mut set = vec![false; n];
    set[root] = true;
    let mut best = (set_score(scores, &set), set.clone());
    let mut excluded = vec![false; n];
    recurse(scores, &mut set, &mut excluded, 1, budget, &mut best);
    best.1
}

/// Extracts the summary subgraph of a rooted, connected source graph.
pub fn extract_summary_graph(obj: &SubgraphObjective, source: &AmrGraph, mode: SearchMode) -> Result<AmrGraph> {
    let unreachable = source.unreachable();
    if !unreachable.is_empty() {
        return Err(Error::Disconnected(unreachable));
    }
    let scores = Scores::new(obj, source)?;
    let exhaustive_mode = match mode {
        SearchMode::Greedy => false,
        SearchMode::Exhaustive => {
            if source.len() > EXHAUSTIVE_LIMIT {
                return Err(Error::invalid(format!(
                    "exhaustive search supports at most {EXHAUSTIVE_LIMIT} nodes, graph has {}",
                    source.len()
                )));
            }
            true
        }
        SearchMode::Auto => source.len() <= EXHAUSTIVE_LIMIT,
    };
    let set = if exhaustive_mode {
        exhaustive(&scores, source.root(), obj.budget)
    } else {
        greedy(&scores, source.root(), obj.budget)
    };
    let keep: BTreeSet<usize> = set.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();
    source.induced(&keep)
}

/// Settings of the objective built for each document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    /// Weights of `(document frequency, depth, named-entity flag)`.
    pub node_weights: Vec<f64>,
    /// Weights of `(ARG0, ARG1, ARG2, ARG3, ARG4, relation frequency)`.
    pub edge_weights: Vec<f64>,
    pub budget_fraction: f64,
    /// Fixed node budget; overrides `budget_fraction` when set.
    pub budget: Option<usize>,
    pub mode: SearchMode,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            node_weights: vec![1.0, -0.2, 0.5],
            edge_weights: vec![0.3, 0.3, 0.2, 0.1, 0.1, 0.5],
            budget_fraction: 0.15,
            budget: None,
            mode: SearchMode::Greedy,
        }
    }
}

/// Where the side information comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Guidance {
    None,
    /// Top-k source sentences by LCS against the summary graph.
    LcsPruned { k: usize },
    /// The gold summary sentences.
    Oracle { gold: Vec<TokenSeq> },
}

/// Decoding settings shared by every document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub fusion: FusionConfig,
    pub lm_weights: InterpolationWeights,
    pub linearize: LinearizeOptions,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self { fusion: FusionConfig::default(), lm_weights: InterpolationWeights::default(), linearize: LinearizeOptions::default() }
    }
}

/// Builds the side document for `summary_graph`, if guidance asks for one.
pub fn side_document(
    doc: &[(TokenSeq, AmrGraph)],
    summary_graph: &AmrGraph,
    guidance: &Guidance,
    opts: &LinearizeOptions,
) -> Result<Option<SideDocument>> {
    match guidance {
        Guidance::None => Ok(None),
        Guidance::LcsPruned { k } => select_side_sentences(doc, summary_graph, *k, opts).map(Some),
        Guidance::Oracle { gold } => oracle_side(gold).map(Some),
    }
}

/// Generates text for one summary graph: linearize, build the side model
/// per `guidance` and run (guided) beam search.
pub fn realize<M: StepModel>(
    model: &M,
    summary_graph: &AmrGraph,
    doc: &[(TokenSeq, AmrGraph)],
    guidance: &Guidance,
    settings: &GenerationSettings,
) -> Result<TokenSeq> {
    let source = linearize(summary_graph, &settings.linearize).stage("linearize")?;
    let side = side_document(doc, summary_graph, guidance, &settings.linearize).stage("side information")?;
    let side_model = match side {
        Some(side) => Some(SideModel { lm: build_counts(&side, SIDE_ORDER).stage("n-gram model")?, weights: settings.lm_weights }),
        None => None,
    };
    generate(model, &source, side_model.as_ref(), &settings.fusion).stage("decode")
}

/// Full pipeline for one document of `(sentence, parse)` pairs: merge the
/// parses, extract the summary subgraph and realize it as text.
pub fn summarize_document<M: StepModel>(
    doc: &[(TokenSeq, AmrGraph)],
    objective: &ObjectiveConfig,
    model: &M,
    guidance: &Guidance,
    settings: &GenerationSettings,
) -> Result<(AmrGraph, TokenSeq)> {
    if doc.is_empty() {
        return Err(Error::invalid("document has no sentences").at_stage("merge"));
    }
    let parses: Vec<AmrGraph> = doc.iter().map(|(_, g)| g.clone()).collect();
    let merged = merge_graphs(&parses).stage("merge")?;
    let featurizer = DefaultFeaturizer::fit(&merged, &parses);
    let budget = objective.budget.unwrap_or_else(|| proportional_budget(merged.len(), objective.budget_fraction));
    let obj = SubgraphObjective::new(objective.node_weights.clone(), objective.edge_weights.clone(), Box::new(featurizer), budget)
        .stage("extract")?;
    let summary = extract_summary_graph(&obj, &merged, objective.mode).stage("extract")?;
    let text = realize(model, &summary, doc, guidance, settings)?;
    Ok((summary, text))
}
