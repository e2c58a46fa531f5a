//! Cross-entropy loss, its analytic gradient, and a finite-difference check.

use ndarray::{s, Array1, Array2};

use super::{add_outer, row_add, AttnStep, GruStep, GruWeights, Seq2SeqParams, Weights, BOS_ID, EOS_ID};
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

struct Forward {
    enc_steps: Vec<GruStep>,
    enc_states: Array2<f64>,
    dec_steps: Vec<AttnStep>,
    /// Decoder inputs: `<s>` followed by the target tokens.
    inputs: Vec<usize>,
    /// Decoder outputs: the target tokens followed by `</s>`.
    outputs: Vec<usize>,
    loss: f64,
}

fn forward(p: &Seq2SeqParams, src: &[usize], tgt: &[usize]) -> Result<Forward> {
    let (enc, enc_steps) = p.encode_ids(src)?;
    let inputs: Vec<usize> = std::iter::once(BOS_ID).chain(tgt.iter().copied()).collect();
    let outputs: Vec<usize> = tgt.iter().copied().chain(std::iter::once(EOS_ID)).collect();
    let mut hidden = enc.states.row(enc.len() - 1).to_owned();
    let mut dec_steps = Vec::with_capacity(inputs.len());
    let mut loss = 0.0;
    for (&prev, &gold) in inputs.iter().zip(&outputs) {
        let step = p.attn_step(hidden.view(), &enc.states, prev);
        loss -= step.probs[gold].ln();
        hidden = step.gru.h.clone();
        dec_steps.push(step);
    }
    Ok(Forward { enc_steps, enc_states: enc.states, dec_steps, inputs, outputs, loss })
}

/// Summed cross-entropy of `tgt ++ </s>` given `src` (token ids).
pub(crate) fn loss(p: &Seq2SeqParams, src: &[usize], tgt: &[usize]) -> Result<f64> {
    Ok(forward(p, src, tgt)?.loss)
}

/// Backpropagates through one GRU step, accumulating weight gradients into
/// `g`. Returns the gradients w.r.t. the input and the previous hidden state.
fn gru_backward(w: &GruWeights, c: &GruStep, dh: &Array1<f64>, g: &mut GruWeights) -> (Array1<f64>, Array1<f64>) {
    let dn = dh * &(1.0 - &c.z);
    let dz = dh * &(&c.h_prev - &c.n);
    let mut dh_prev = dh * &c.z;

    let da_n = &dn * &(1.0 - &c.n * &c.n);
    let rh = &c.r * &c.h_prev;
    add_outer(&mut g.w_n, &da_n, &c.x);
    add_outer(&mut g.u_n, &da_n, &rh);
    g.b_n += &da_n;
    let mut dx = w.w_n.t().dot(&da_n);
    let drh = w.u_n.t().dot(&da_n);
    let dr = &drh * &c.h_prev;
    dh_prev += &(&drh * &c.r);

    let da_z = &dz * &(&c.z * &(1.0 - &c.z));
    add_outer(&mut g.w_z, &da_z, &c.x);
    add_outer(&mut g.u_z, &da_z, &c.h_prev);
    g.b_z += &da_z;
    dx += &w.w_z.t().dot(&da_z);
    dh_prev += &w.u_z.t().dot(&da_z);

    let da_r = &dr * &(&c.r * &(1.0 - &c.r));
    add_outer(&mut g.w_r, &da_r, &c.x);
    add_outer(&mut g.u_r, &da_r, &c.h_prev);
    g.b_r += &da_r;
    dx += &w.w_r.t().dot(&da_r);
    dh_prev += &w.u_r.t().dot(&da_r);

    (dx, dh_prev)
}

/// Summed cross-entropy and its gradient for one (source, target) pair of
/// token ids.
pub fn loss_and_grad(p: &Seq2SeqParams, src: &[usize], tgt: &[usize]) -> Result<(f64, Weights)> {
    let f = forward(p, src, tgt)?;
    let w = &p.weights;
    let hdim = p.dims.hidden;
    let mut g = w.zeros_like();
    let mut d_enc = Array2::<f64>::zeros(f.enc_states.raw_dim());
    let mut ds_carry = Array1::<f64>::zeros(hdim);

    for (j, step) in f.dec_steps.iter().enumerate().rev() {
        let mut dlogits = step.probs.clone();
        dlogits[f.outputs[j]] -= 1.0;
        add_outer(&mut g.project, &dlogits, &step.attentional);
        let dh_tilde = w.project.t().dot(&dlogits);
        let dpre = &dh_tilde * &(1.0 - &step.attentional * &step.attentional);
        add_outer(&mut g.combine, &dpre, &step.concat);
        let dconcat = w.combine.t().dot(&dpre);
        let dc = dconcat.slice(s![..hdim]).to_owned();
        let mut ds = dconcat.slice(s![hdim..]).to_owned() + &ds_carry;

        // context = Σ_s a_s h̄_s
        add_outer(&mut d_enc, &step.alignment, &dc);
        let da = f.enc_states.dot(&dc);
        let dscore = &step.alignment * &(&da - step.alignment.dot(&da));
        // score_s = h̄_s · q, q = W_aᵀ h_t
        let dq = f.enc_states.t().dot(&dscore);
        add_outer(&mut d_enc, &dscore, &step.query);
        ds += &w.attn.dot(&dq);
        add_outer(&mut g.attn, &step.gru.h, &dq);

        let (dx, dh_prev) = gru_backward(&w.decoder, &step.gru, &ds, &mut g.decoder);
        row_add(&mut g.tgt_embed, f.inputs[j], &dx);
        ds_carry = dh_prev;
    }

    // the decoder starts from the last encoder state
    let last = f.enc_states.nrows() - 1;
    d_enc.row_mut(last).scaled_add(1.0, &ds_carry);

    let mut dh_carry = Array1::<f64>::zeros(hdim);
    for (t, step) in f.enc_steps.iter().enumerate().rev() {
        let dh = d_enc.row(t).to_owned() + &dh_carry;
        let (dx, dh_prev) = gru_backward(&w.encoder, step, &dh, &mut g.encoder);
        row_add(&mut g.src_embed, src[t], &dx);
        dh_carry = dh_prev;
    }
    Ok((f.loss, g))
}

fn ids(p: &Seq2SeqParams, example: &(TokenSeq, TokenSeq)) -> (Vec<usize>, Vec<usize>) {
    (
        example.0.iter().map(|t| p.src_vocab.id(t)).collect(),
        example.1.iter().map(|t| p.tgt_vocab.id(t)).collect(),
    )
}

/// Maximum relative error between the analytic gradient and central finite
/// differences over every parameter entry. The relative error of an entry is
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-6)`; the floor keeps
/// entries whose true gradient is ~0 from dividing round-off by round-off.
pub fn grad_check(p: &Seq2SeqParams, example: &(TokenSeq, TokenSeq), epsilon: f64) -> Result<f64> {
    grad_check_with(p, example, epsilon, |_| {})
}

/// [`grad_check`] with a hook that may alter the analytic gradient before the
/// comparison (used to confirm that corrupted gradients are caught).
pub fn grad_check_with(
    p: &Seq2SeqParams,
    example: &(TokenSeq, TokenSeq),
    epsilon: f64,
    mutate: impl FnOnce(&mut Weights),
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    let (src, tgt) = ids(p, example);
    let (_, mut analytic) = loss_and_grad(p, &src, &tgt)?;
    mutate(&mut analytic);

    let mut probe = p.clone();
    let mut worst = 0.0f64;
    let names: Vec<&'static str> = analytic.tensors().iter().map(|(n, _)| *n).collect();
    for (ti, name) in names.iter().enumerate() {
        let len = analytic.tensors()[ti].1.len();
        for k in 0..len {
            let orig = probe.weights.tensors()[ti].1[k];
            probe.weights.tensors_mut()[ti].1[k] = orig + epsilon;
            let plus = loss(&probe, &src, &tgt)?;
            probe.weights.tensors_mut()[ti].1[k] = orig - epsilon;
            let minus = loss(&probe, &src, &tgt)?;
            probe.weights.tensors_mut()[ti].1[k] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.tensors()[ti].1[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if !rel.is_finite() {
                return Err(Error::invalid(format!("non-finite gradient comparison in {name}[{k}]")));
            }
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
