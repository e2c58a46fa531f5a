//! Beam search with shallow fusion of the side-information model.
//!
//! For a candidate word `w` with base probability `a` and side probability
//! `b`, the per-step score is `log a + ψ·log(b/a + 1)` when `w` occurs in the
//! side document, and `log a` otherwise. Hypothesis scores are plain sums of
//! per-step scores, without length normalisation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::{InterpolationWeights, NGramModel};
use crate::tokens::TokenSeq;

/// Default influence of the side information.
pub const DEFAULT_PSI: f64 = 0.95;
pub const DEFAULT_BEAM_WIDTH: usize = 5;
pub const DEFAULT_MAX_LENGTH: usize = 100;

/// A left-to-right model that yields a distribution over its target
/// vocabulary at every step.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;
    fn token(&self, id: usize) -> &str;
    fn bos_id(&self) -> usize;
    fn eos_id(&self) -> usize;
    fn start(&self, source: &TokenSeq) -> Result<Self::State>;
    /// Probabilities of every target id after `prev`, and the next state.
    fn step(&self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub psi: f64,
    pub beam_width: usize,
    pub max_length: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { psi: DEFAULT_PSI, beam_width: DEFAULT_BEAM_WIDTH, max_length: DEFAULT_MAX_LENGTH }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.psi) {
            return Err(Error::invalid(format!("psi must lie in [0, 1], got {}", self.psi)));
        }
        if self.beam_width == 0 || self.max_length == 0 {
            return Err(Error::invalid("beam width and max length must be at least 1"));
        }
        Ok(())
    }
}

/// The side n-gram model together with its interpolation weights.
#[derive(Debug, Clone)]
pub struct SideModel {
    pub lm: NGramModel,
    pub weights: InterpolationWeights,
}

/// `log a + ψ·log(b/a + 1)`; `-∞` when `a = 0`. Exactly `log a` when `b = 0`
/// or `ψ = 0`.
pub fn fused_score(a: f64, b: f64, psi: f64) -> f64 {
    if a <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if psi == 0.0 || b == 0.0 {
        return a.ln();
    }
    a.ln() + psi * (b / a).ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub tokens: TokenSeq,
    pub score: f64,
}

/// One kept expansion of a beam step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub slot: usize,
    pub token: String,
    pub base_logprob: f64,
    pub side_prob: Option<f64>,
    pub fused: f64,
}

#[derive(Clone)]
struct Hyp<S> {
    tokens: Vec<usize>,
    score: f64,
    state: S,
}

struct Candidate {
    parent: usize,
    tokens: Vec<usize>,
    score: f64,
    base_logprob: f64,
    side_prob: Option<f64>,
    step_score: f64,
}

/// Higher score first, then fewer tokens, then lexicographic token order.
fn rank<M: StepModel>(model: &M, a_tokens: &[usize], a_score: f64, b_tokens: &[usize], b_score: f64) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then(a_tokens.len().cmp(&b_tokens.len()))
        .then_with(|| {
            let a = a_tokens.iter().map(|&t| model.token(t));
            let b = b_tokens.iter().map(|&t| model.token(t));
            a.cmp(b)
        })
}

/// Per-step score of `word` under the fusion rule, with the base log
/// probability and the side probability (when the word is eligible).
pub fn step_score(
    a: f64,
    word: &str,
    history: &[&str],
    side: Option<&SideModel>,
    psi: f64,
) -> (f64, Option<f64>) {
    match side {
        Some(s) if s.lm.contains(word) => {
            let b = s.lm.p_side(word, history, &s.weights);
            (fused_score(a, b, psi), Some(b))
        }
        _ => (a.ln(), None),
    }
}

/// Beam search returning every finished hypothesis, best first.
pub fn beam_search<M: StepModel>(
    model: &M,
    source: &TokenSeq,
    side: Option<&SideModel>,
    cfg: &FusionConfig,
) -> Result<Vec<Scored>> {
    search(model, source, side, cfg, None)
}

/// [`beam_search`] that also records every kept expansion.
pub fn beam_search_traced<M: StepModel>(
    model: &M,
    source: &TokenSeq,
    side: Option<&SideModel>,
    cfg: &FusionConfig,
) -> Result<(Vec<Scored>, Vec<TraceRecord>)> {
    let mut trace = Vec::new();
    let out = search(model, source, side, cfg, Some(&mut trace))?;
    Ok((out, trace))
}

/// Top hypothesis of [`beam_search`] (empty if nothing finished).
pub fn generate<M: StepModel>(
    model: &M,
    source: &TokenSeq,
    side: Option<&SideModel>,
    cfg: &FusionConfig,
) -> Result<TokenSeq> {
    Ok(beam_search(model, source, side, cfg)?.into_iter().next().map(|s| s.tokens).unwrap_or_default())
}

fn search<M: StepModel>(
    model: &M,
    source: &TokenSeq,
    side: Option<&SideModel>,
    cfg: &FusionConfig,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<Vec<Scored>> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::invalid("beam search needs a non-empty source"));
    }
    let (bos, eos) = (model.bos_id(), model.eos_id());
    let mut active = vec![Hyp { tokens: Vec::new(), score: 0.0, state: model.start(source)? }];
    let mut finished: Vec<Hyp<()>> = Vec::new();

    for step in 0..cfg.max_length {
        if active.is_empty() {
            break;
        }
        let mut candidates = Vec::new();
        let mut next_states = Vec::with_capacity(active.len());
        for (slot, h) in active.iter().enumerate() {
            let prev = h.tokens.last().copied().unwrap_or(bos);
            let (probs, next) = model.step(&h.state, prev)?;
            if probs.len() != model.vocab_size() {
                return Err(Error::Dimension(format!("model returned {} probabilities for a vocabulary of {}", probs.len(), model.vocab_size())));
            }
            next_states.push(next);
            let history: Vec<&str> = h.tokens.iter().map(|&t| model.token(t)).collect();
            for (w, &a) in probs.iter().enumerate() {
                if w == bos || !(a > 0.0) {
                    continue;
                }
                let base_logprob = a.ln();
                let (s, side_prob) = step_score(a, model.token(w), &history, side, cfg.psi);
                let mut tokens = h.tokens.clone();
                tokens.push(w);
                candidates.push(Candidate { parent: slot, tokens, score: h.score + s, base_logprob, side_prob, step_score: s });
            }
        }
        candidates.sort_by(|a, b| rank(model, &a.tokens, a.score, &b.tokens, b.score));
        candidates.truncate(cfg.beam_width);

        let mut next_active = Vec::with_capacity(candidates.len());
        for (slot, c) in candidates.into_iter().enumerate() {
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceRecord {
                    step,
                    slot,
                    token: model.token(*c.tokens.last().expect("non-empty")).to_owned(),
                    base_logprob: c.base_logprob,
                    side_prob: c.side_prob,
                    fused: c.step_score,
                });
            }
            if c.tokens.last() == Some(&eos) || c.tokens.len() == cfg.max_length {
                finished.push(Hyp { tokens: c.tokens, score: c.score, state: () });
            } else {
                next_active.push(Hyp { tokens: c.tokens, score: c.score, state: next_states[c.parent].clone() });
            }
        }
        active = next_active;
        if finished.len() >= cfg.beam_width {
            break;
        }
    }

    finished.sort_by(|a, b| rank(model, &a.tokens, a.score, &b.tokens, b.score));
    Ok(finished
        .into_iter()
        .map(|h| {
            let words = h.tokens.iter().filter(|&&t| t != eos).map(|&t| model.token(t).to_owned()).collect();
            Scored { tokens: TokenSeq::from_vec_unchecked(words), score: h.score }
        })
        .collect())
}
