//! Side information: the sentences used to guide decoding.
//!
//! In the pruned setting these are the `k` source sentences whose AMR parses
//! share the longest common subsequence with the summary graph; in the oracle
//! setting they are the gold summary itself.

use serde::{Deserialize, Serialize};

use crate::amr::{linearize, AmrGraph, LinearizeOptions};
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

/// Number of side sentences kept by default.
pub const DEFAULT_TOP_K: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideMode {
    Oracle,
    LcsPruned { k: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideDocument {
    pub sentences: Vec<TokenSeq>,
    pub mode: SideMode,
}

impl SideDocument {
    pub fn is_empty(&self) -> bool {
        self.sentences.iter().all(|s| s.is_empty())
    }
}

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Scores every sentence of `doc` by the LCS between its linearized parse
/// and the linearized summary graph, and keeps the `k` best in descending
/// score order (document order on ties).
pub fn select_side_sentences(
    doc: &[(TokenSeq, AmrGraph)],
    summary_graph: &AmrGraph,
    k: usize,
    opts: &LinearizeOptions,
) -> Result<SideDocument> {
    if doc.is_empty() {
        return Err(Error::invalid("side-information selection needs a non-empty document"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let summary = linearize(summary_graph, opts)?;
    let mut scored = doc
        .iter()
        .enumerate()
        .map(|(i, (_, parse))| Ok((lcs_length(&linearize(parse, opts)?, &summary), i)))
        .collect::<Result<Vec<_>>>()?;
    // stable: equal scores keep document order
    scored.sort_by(|a, b| b.0.cmp(&a.0));
    let sentences = scored.iter().take(k).map(|&(_, i)| doc[i].0.clone()).collect();
    Ok(SideDocument { sentences, mode: SideMode::LcsPruned { k } })
}

/// Wraps the gold summary sentences unchanged as oracle side information.
pub fn oracle_side(gold_summary: &[TokenSeq]) -> Result<SideDocument> {
    if gold_summary.is_empty() {
        return Err(Error::invalid("oracle side information needs a non-empty gold summary"));
    }
    Ok(SideDocument { sentences: gold_summary.to_vec(), mode: SideMode::Oracle })
}
