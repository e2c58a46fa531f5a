//! A small attention encoder-decoder.
//!
//! GRU encoder and decoder, Luong "general" attention
//! `score(h_t, h̄_s) = h_tᵀ W_a h̄_s`, attentional state
//! `h̃_t = tanh(W_c [c_t; h_t])` and output `softmax(W_s h̃_t)`. Gradients are
//! computed by hand in [`gradients`] and checked against finite differences.

mod checkpoint;
pub mod gradients;
mod train;
mod vocab;

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradients::{grad_check, grad_check_with};
pub use train::{train, TrainConfig, TrainReport};
pub use vocab::{Vocab, BOS_ID, EOS_ID, UNK_ID};

/// Weights of one GRU layer; input matrices are `hidden × input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruWeights {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_n: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_n: Array1<f64>,
}

impl GruWeights {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Array2::zeros((hidden, input)),
            w_r: Array2::zeros((hidden, input)),
            w_n: Array2::zeros((hidden, input)),
            u_z: Array2::zeros((hidden, hidden)),
            u_r: Array2::zeros((hidden, hidden)),
            u_n: Array2::zeros((hidden, hidden)),
            b_z: Array1::zeros(hidden),
            b_r: Array1::zeros(hidden),
            b_n: Array1::zeros(hidden),
        }
    }
}

/// Every trainable tensor. Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub src_embed: Array2<f64>,
    pub tgt_embed: Array2<f64>,
    pub encoder: GruWeights,
    pub decoder: GruWeights,
    /// `W_a`, hidden × hidden.
    pub attn: Array2<f64>,
    /// `W_c`, hidden × 2·hidden.
    pub combine: Array2<f64>,
    /// `W_s`, target vocab × hidden.
    pub project: Array2<f64>,
}

macro_rules! for_each_tensor {
    ($w:expr, $f:ty, $as:ident) => {{
        let w = $w;
        vec![
            ("src_embed", w.src_embed.$as()),
            ("tgt_embed", w.tgt_embed.$as()),
            ("encoder.w_z", w.encoder.w_z.$as()),
            ("encoder.w_r", w.encoder.w_r.$as()),
            ("encoder.w_n", w.encoder.w_n.$as()),
            ("encoder.u_z", w.encoder.u_z.$as()),
            ("encoder.u_r", w.encoder.u_r.$as()),
            ("encoder.u_n", w.encoder.u_n.$as()),
            ("encoder.b_z", w.encoder.b_z.$as()),
            ("encoder.b_r", w.encoder.b_r.$as()),
            ("encoder.b_n", w.encoder.b_n.$as()),
            ("decoder.w_z", w.decoder.w_z.$as()),
            ("decoder.w_r", w.decoder.w_r.$as()),
            ("decoder.w_n", w.decoder.w_n.$as()),
            ("decoder.u_z", w.decoder.u_z.$as()),
            ("decoder.u_r", w.decoder.u_r.$as()),
            ("decoder.u_n", w.decoder.u_n.$as()),
            ("decoder.b_z", w.decoder.b_z.$as()),
            ("decoder.b_r", w.decoder.b_r.$as()),
            ("decoder.b_n", w.decoder.b_n.$as()),
            ("attn", w.attn.$as()),
            ("combine", w.combine.$as()),
            ("project", w.project.$as()),
        ]
        .into_iter()
        .map(|(name, t)| (name, t.expect("weights are in standard layout")))
        .collect::<Vec<(&'static str, $f)>>()
    }};
}

impl Weights {
    pub fn zeros(src_vocab: usize, tgt_vocab: usize, embed: usize, hidden: usize) -> Self {
        Self {
            src_embed: Array2::zeros((src_vocab, embed)),
            tgt_embed: Array2::zeros((tgt_vocab, embed)),
            encoder: GruWeights::zeros(embed, hidden),
            decoder: GruWeights::zeros(embed, hidden),
            attn: Array2::zeros((hidden, hidden)),
            combine: Array2::zeros((hidden, 2 * hidden)),
            project: Array2::zeros((tgt_vocab, hidden)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.src_embed.nrows(), self.tgt_embed.nrows(), self.src_embed.ncols(), self.attn.nrows())
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        for_each_tensor!(self, &[f64], as_slice)
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        for_each_tensor!(self, &mut [f64], as_slice_mut)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|(_, t)| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Weights) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { embed: 32, hidden: 64 }
    }
}

/// A trained (or freshly initialised) model with its vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqParams {
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    pub dims: Dims,
    pub weights: Weights,
}

/// Hidden states of the encoder, one row per source token.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub states: Array2<f64>,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    /// `h_t`
    pub hidden: Array1<f64>,
    /// `h̃_t` of the last step, `None` before the first step.
    pub attentional: Option<Array1<f64>>,
    /// `a_t` of the last step.
    pub alignment: Option<Array1<f64>>,
}

/// `P_s2s` over the target vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub probs: Array1<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn softmax(x: &Array1<f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = x.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

/// Intermediate values of one GRU step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    pub n: Array1<f64>,
    pub h: Array1<f64>,
}

pub(crate) fn gru_step(w: &GruWeights, x: ArrayView1<f64>, h_prev: ArrayView1<f64>) -> GruStep {
    let z = (w.w_z.dot(&x) + w.u_z.dot(&h_prev) + &w.b_z).mapv(sigmoid);
    let r = (w.w_r.dot(&x) + w.u_r.dot(&h_prev) + &w.b_r).mapv(sigmoid);
    let rh = &r * &h_prev;
    let n = (w.w_n.dot(&x) + w.u_n.dot(&rh) + &w.b_n).mapv(f64::tanh);
    let h = (1.0 - &z) * &n + &z * &h_prev;
    GruStep { x: x.to_owned(), h_prev: h_prev.to_owned(), z, r, n, h }
}

/// Intermediate values of one attention decoder step.
#[derive(Debug, Clone)]
pub(crate) struct AttnStep {
    pub gru: GruStep,
    /// `W_aᵀ h_t`
    pub query: Array1<f64>,
    pub alignment: Array1<f64>,
    /// `[c_t; h_t]`
    pub concat: Array1<f64>,
    pub attentional: Array1<f64>,
    pub probs: Array1<f64>,
}

impl Seq2SeqParams {
    /// Random initialisation, uniform in ±1/√hidden for matrices and
    /// embeddings, zero for biases.
    pub fn init(src_vocab: Vocab, tgt_vocab: Vocab, dims: Dims, seed: u64) -> Result<Self> {
        if dims.embed == 0 || dims.hidden == 0 {
            return Err(Error::invalid("embedding and hidden sizes must be positive"));
        }
        let mut weights = Weights::zeros(src_vocab.len(), tgt_vocab.len(), dims.embed, dims.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1.0 / (dims.hidden as f64).sqrt();
        for (name, t) in weights.tensors_mut() {
            if name.contains(".b_") {
                continue;
            }
            t.iter_mut().for_each(|x| *x = rng.gen_range(-k..k));
        }
        Ok(Self { src_vocab, tgt_vocab, dims, weights })
    }

    /// All-zero weights; mostly useful in tests.
    pub fn zeros(src_vocab: Vocab, tgt_vocab: Vocab, dims: Dims) -> Self {
        let weights = Weights::zeros(src_vocab.len(), tgt_vocab.len(), dims.embed, dims.hidden);
        Self { src_vocab, tgt_vocab, dims, weights }
    }

    /// Checks that every tensor has the shape implied by the vocabularies and
    /// dimensions and that all entries are finite.
    pub fn validate(&self) -> Result<()> {
        let (e, h) = (self.dims.embed, self.dims.hidden);
        let (vs, vt) = (self.src_vocab.len(), self.tgt_vocab.len());
        let expect = |name: &str, got: &[usize], want: &[usize]| -> Result<()> {
            if got != want {
                return Err(Error::Dimension(format!("{name}: expected {want:?}, found {got:?}")));
            }
            Ok(())
        };
        let w = &self.weights;
        expect("src_embed", w.src_embed.shape(), &[vs, e])?;
        expect("tgt_embed", w.tgt_embed.shape(), &[vt, e])?;
        for (tag, g) in [("encoder", &w.encoder), ("decoder", &w.decoder)] {
            for (n, m) in [("w_z", &g.w_z), ("w_r", &g.w_r), ("w_n", &g.w_n)] {
                expect(&format!("{tag}.{n}"), m.shape(), &[h, e])?;
            }
            for (n, m) in [("u_z", &g.u_z), ("u_r", &g.u_r), ("u_n", &g.u_n)] {
                expect(&format!("{tag}.{n}"), m.shape(), &[h, h])?;
            }
            for (n, b) in [("b_z", &g.b_z), ("b_r", &g.b_r), ("b_n", &g.b_n)] {
                expect(&format!("{tag}.{n}"), b.shape(), &[h])?;
            }
        }
        expect("attn", w.attn.shape(), &[h, h])?;
        expect("combine", w.combine.shape(), &[h, 2 * h])?;
        expect("project", w.project.shape(), &[vt, h])?;
        if !w.is_finite() {
            return Err(Error::Checkpoint("non-finite weight".into()));
        }
        Ok(())
    }

    pub(crate) fn encode_ids(&self, ids: &[usize]) -> Result<(EncoderOutput, Vec<GruStep>)> {
        if ids.is_empty() {
            return Err(Error::invalid("cannot encode an empty source sequence"));
        }
        let mut h = Array1::zeros(self.dims.hidden);
        let mut states = Array2::zeros((ids.len(), self.dims.hidden));
        let mut steps = Vec::with_capacity(ids.len());
        for (t, &id) in ids.iter().enumerate() {
            let step = gru_step(&self.weights.encoder, self.weights.src_embed.row(id), h.view());
            states.row_mut(t).assign(&step.h);
            h = step.h.clone();
            steps.push(step);
        }
        Ok((EncoderOutput { states }, steps))
    }

    /// Runs the encoder over `input`, mapping unknown tokens to `<unk>`.
    pub fn encode(&self, input: &TokenSeq) -> Result<EncoderOutput> {
        let ids: Vec<usize> = input.iter().map(|t| self.src_vocab.id(t)).collect();
        Ok(self.encode_ids(&ids)?.0)
    }

    /// Decoder state before the first step: the last encoder state.
    pub fn initial_state(&self, enc: &EncoderOutput) -> DecoderState {
        DecoderState { hidden: enc.states.row(enc.len() - 1).to_owned(), attentional: None, alignment: None }
    }

    pub(crate) fn attn_step(&self, hidden: ArrayView1<f64>, enc: &Array2<f64>, prev: usize) -> AttnStep {
        let w = &self.weights;
        let gru = gru_step(&w.decoder, w.tgt_embed.row(prev), hidden);
        let query = w.attn.t().dot(&gru.h);
        let alignment = softmax(&enc.dot(&query));
        let context = enc.t().dot(&alignment);
        let mut concat = Array1::zeros(2 * self.dims.hidden);
        concat.slice_mut(s![..self.dims.hidden]).assign(&context);
        concat.slice_mut(s![self.dims.hidden..]).assign(&gru.h);
        let attentional = w.combine.dot(&concat).mapv(f64::tanh);
        let probs = softmax(&w.project.dot(&attentional));
        AttnStep { gru, query, alignment, concat, attentional, probs }
    }

    /// One decoder step on the id of the previous target token.
    pub fn decode_step_id(&self, state: &DecoderState, enc: &EncoderOutput, prev: usize) -> Result<(Distribution, DecoderState)> {
        if enc.is_empty() {
            return Err(Error::invalid("empty encoder output"));
        }
        if state.hidden.len() != self.dims.hidden || enc.states.ncols() != self.dims.hidden {
            return Err(Error::Dimension(format!(
                "decoder state {} / encoder states {} vs hidden size {}",
                state.hidden.len(),
                enc.states.ncols(),
                self.dims.hidden
            )));
        }
        if prev >= self.tgt_vocab.len() {
            return Err(Error::Dimension(format!("target id {prev} outside vocabulary")));
        }
        let step = self.attn_step(state.hidden.view(), &enc.states, prev);
        let next = DecoderState { hidden: step.gru.h, attentional: Some(step.attentional), alignment: Some(step.alignment) };
        Ok((Distribution { probs: step.probs }, next))
    }

    /// One decoder step on the previous target token (unknowns map to `<unk>`).
    pub fn decode_step(&self, state: &DecoderState, enc: &EncoderOutput, prev_token: &str) -> Result<(Distribution, DecoderState)> {
        self.decode_step_id(state, enc, self.tgt_vocab.id(prev_token))
    }

    /// Greedy decoding: most probable token at each step (ties go to the
    /// lexicographically smaller token), stopping at `</s>` or `max_len`.
    pub fn greedy_decode(&self, source: &TokenSeq, max_len: usize) -> Result<TokenSeq> {
        let enc = self.encode(source)?;
        let mut state = self.initial_state(&enc);
        let mut prev = BOS_ID;
        let mut out = TokenSeq::empty();
        for _ in 0..max_len {
            let (dist, next) = self.decode_step_id(&state, &enc, prev)?;
            let best = (0..dist.probs.len())
                .filter(|&i| i != BOS_ID)
                .max_by(|&a, &b| {
                    dist.probs[a]
                        .total_cmp(&dist.probs[b])
                        .then_with(|| self.tgt_vocab.token(b).cmp(self.tgt_vocab.token(a)))
                })
                .expect("vocabulary has candidates");
            if best == EOS_ID {
                break;
            }
            out.push_unchecked(self.tgt_vocab.token(best).to_owned());
            prev = best;
            state = next;
        }
        Ok(out)
    }

    /// Total cross-entropy (natural log) of `target ++ </s>` under teacher
    /// forcing.
    pub fn sequence_loss(&self, source: &TokenSeq, target: &TokenSeq) -> Result<f64> {
        let src: Vec<usize> = source.iter().map(|t| self.src_vocab.id(t)).collect();
        let tgt: Vec<usize> = target.iter().map(|t| self.tgt_vocab.id(t)).collect();
        gradients::loss(self, &src, &tgt)
    }
}

/// Decoder session state used by beam search.
#[derive(Debug, Clone)]
pub struct Seq2SeqState {
    enc: Arc<EncoderOutput>,
    dec: DecoderState,
}

impl crate::decode::StepModel for Seq2SeqParams {
    type State = Seq2SeqState;

    fn vocab_size(&self) -> usize {
        self.tgt_vocab.len()
    }

    fn token(&self, id: usize) -> &str {
        self.tgt_vocab.token(id)
    }

    fn bos_id(&self) -> usize {
        BOS_ID
    }

    fn eos_id(&self) -> usize {
        EOS_ID
    }

    fn start(&self, source: &TokenSeq) -> Result<Seq2SeqState> {
        let enc = self.encode(source)?;
        let dec = self.initial_state(&enc);
        Ok(Seq2SeqState { enc: Arc::new(enc), dec })
    }

    fn step(&self, state: &Seq2SeqState, prev: usize) -> Result<(Vec<f64>, Seq2SeqState)> {
        let (dist, dec) = self.decode_step_id(&state.dec, &state.enc, prev)?;
        Ok((dist.probs.to_vec(), Seq2SeqState { enc: Arc::clone(&state.enc), dec }))
    }
}

pub(crate) fn row_add(m: &mut Array2<f64>, row: usize, v: &Array1<f64>) {
    m.row_mut(row).scaled_add(1.0, v);
}

pub(crate) fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    ndarray::linalg::general_mat_mul(1.0, &col, &row, 1.0, m);
}
