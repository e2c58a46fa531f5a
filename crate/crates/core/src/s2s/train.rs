use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gradients::loss_and_grad;
use super::{Seq2SeqParams, Weights};
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global gradient-norm clipping threshold.
    pub clip: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, epochs: 30, clip: 5.0, batch_size: 8, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: Seq2SeqParams,
    /// Mean per-token cross-entropy of each epoch, measured on the batches
    /// before their update.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: Weights,
    v: Weights,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(like: &Weights) -> Self {
        Self { m: like.zeros_like(), v: like.zeros_like(), t: 0 }
    }

    fn step(&mut self, w: &mut Weights, g: &Weights, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let params = w.tensors_mut();
        let grads = g.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            for i in 0..p.1.len() {
                let gi = g.1[i];
                m.1[i] = Self::BETA1 * m.1[i] + (1.0 - Self::BETA1) * gi;
                v.1[i] = Self::BETA2 * v.1[i] + (1.0 - Self::BETA2) * gi * gi;
                p.1[i] -= lr * (m.1[i] / c1) / ((v.1[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains with teacher forcing on per-token cross-entropy using Adam over
/// shuffled mini-batches and global-norm gradient clipping.
///
/// Mini-batch gradients are computed in parallel but summed in corpus order,
/// so the result depends only on the inputs and `cfg.seed`.
pub fn train(params: &Seq2SeqParams, corpus: &[(TokenSeq, TokenSeq)], cfg: &TrainConfig) -> Result<TrainReport> {
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) || !(cfg.clip > 0.0) {
        return Err(Error::invalid("learning rate must be >= 0 and clip > 0"));
    }
    params.validate()?;
    let data: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .iter()
        .map(|(s, t)| {
            if s.is_empty() {
                return Err(Error::invalid("empty source sequence in training corpus"));
            }
            Ok((s.iter().map(|x| params.src_vocab.id(x)).collect(), t.iter().map(|x| params.tgt_vocab.id(x)).collect()))
        })
        .collect::<Result<_>>()?;

    let mut p = params.clone();
    let mut adam = Adam::new(&p.weights);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_tokens) = (0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = batch
                .par_iter()
                .map(|&i| loss_and_grad(&p, &data[i].0, &data[i].1))
                .collect::<Result<Vec<_>>>()?;
            let tokens: usize = batch.iter().map(|&i| data[i].1.len() + 1).sum();
            let mut grad = p.weights.zeros_like();
            let mut loss = 0.0;
            for (l, g) in &results {
                loss += l;
                grad.add_assign(g);
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            grad.scale(1.0 / tokens as f64);
            let norm = grad.l2_norm();
            if norm > cfg.clip {
                grad.scale(cfg.clip / norm);
            }
            adam.step(&mut p.weights, &grad, cfg.learning_rate);
            epoch_loss += loss;
            epoch_tokens += tokens;
        }
        epoch_losses.push(epoch_loss / epoch_tokens as f64);
    }
    Ok(TrainReport { params: p, epoch_losses })
}
