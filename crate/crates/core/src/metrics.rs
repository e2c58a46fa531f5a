//! Corpus BLEU and ROUGE-1/2/L for single-reference evaluation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::side_info::lcs_length;
use crate::tokens::TokenSeq;

/// Precision, recall and F1 of one ROUGE variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
    #[serde(rename = "f")]
    pub f1: f64,
}

impl Prf {
    fn from_counts(overlap: usize, hyp_total: usize, ref_total: usize) -> Self {
        let precision = if hyp_total == 0 { 0.0 } else { overlap as f64 / hyp_total as f64 };
        let recall = if ref_total == 0 { 0.0 } else { overlap as f64 / ref_total as f64 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub rouge1: Prf,
    pub rouge2: Prf,
    #[serde(rename = "rougeL")]
    pub rouge_l: Prf,
}

impl MetricReport {
    /// Corpus BLEU (see [`bleu`]) plus ROUGE micro-averaged over sentence pairs: overlap
    /// and n-gram totals are summed over the corpus before forming P/R/F.
    pub fn compute(hypotheses: &[TokenSeq], references: &[TokenSeq]) -> Result<Self> {
        check_lengths(hypotheses, references)?;
        let mut r1 = (0, 0, 0);
        let mut r2 = (0, 0, 0);
        let mut rl = (0, 0, 0);
        for (h, r) in hypotheses.iter().zip(references) {
            add(&mut r1, ngram_overlap(h, r, 1));
            add(&mut r2, ngram_overlap(h, r, 2));
            add(&mut rl, (lcs_length(h, r), h.len(), r.len()));
        }
        Ok(MetricReport {
            bleu: bleu(hypotheses, references)?,
            rouge1: Prf::from_counts(r1.0, r1.1, r1.2),
            rouge2: Prf::from_counts(r2.0, r2.1, r2.2),
            rouge_l: Prf::from_counts(rl.0, rl.1, rl.2),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn add(acc: &mut (usize, usize, usize), x: (usize, usize, usize)) {
    acc.0 += x.0;
    acc.1 += x.1;
    acc.2 += x.2;
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>9} {:>9} {:>9}", "metric", "P", "R", "F1")?;
        writeln!(f, "{:<8} {:>9} {:>9} {:>9.4}", "BLEU", "-", "-", self.bleu)?;
        for (name, m) in [("ROUGE-1", self.rouge1), ("ROUGE-2", self.rouge2), ("ROUGE-L", self.rouge_l)] {
            writeln!(f, "{:<8} {:>9.4} {:>9.4} {:>9.4}", name, m.precision, m.recall, m.f1)?;
        }
        Ok(())
    }
}

fn check_lengths(h: &[TokenSeq], r: &[TokenSeq]) -> Result<()> {
    if h.len() != r.len() {
        return Err(Error::invalid(format!("{} hypotheses but {} references", h.len(), r.len())));
    }
    Ok(())
}

fn ngram_counts(seq: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// (clipped overlap, hypothesis n-gram count, reference n-gram count)
fn ngram_overlap(hyp: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let overlap = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (overlap, h.values().sum(), r.values().sum())
}

/// Corpus-level BLEU with n-gram orders `1..=max_order`, uniform weights and
/// the standard brevity penalty. Returns 0 if any order has zero matches
/// (including orders the hypotheses are too short to contain).
pub fn bleu_with_order(hypotheses: &[TokenSeq], references: &[TokenSeq], max_order: usize) -> Result<f64> {
    check_lengths(hypotheses, references)?;
    if max_order == 0 {
        return Err(Error::invalid("BLEU order must be at least 1"));
    }
    let mut matches = vec![0usize; max_order];
    let mut totals = vec![0usize; max_order];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_order {
            let (m, t, _) = ngram_overlap(h, r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if hyp_len == 0 || matches.iter().zip(&totals).any(|(&m, &t)| m == 0 || t == 0) {
        return Ok(0.0);
    }
    let log_mean =
        matches.iter().zip(&totals).map(|(&m, &t)| (m as f64 / t as f64).ln()).sum::<f64>() / max_order as f64;
    let bp = if hyp_len < ref_len { (1.0 - ref_len as f64 / hyp_len as f64).exp() } else { 1.0 };
    Ok((bp * log_mean.exp()).clamp(0.0, 1.0))
}

/// Corpus BLEU-4, with the order capped at the longest hypothesis length so
/// that corpora of very short outputs are still scored (a 3-token corpus is
/// scored with orders 1..3).
pub fn bleu(hypotheses: &[TokenSeq], references: &[TokenSeq]) -> Result<f64> {
    check_lengths(hypotheses, references)?;
    let longest = hypotheses.iter().map(|h| h.len()).max().unwrap_or(0);
    if longest == 0 {
        return Ok(0.0);
    }
    bleu_with_order(hypotheses, references, longest.min(4))
}

/// ROUGE-N of one hypothesis against one reference with clipped counts.
pub fn rouge_n(hyp: &TokenSeq, reference: &TokenSeq, n: usize) -> Prf {
    let (o, h, r) = ngram_overlap(hyp, reference, n);
    Prf::from_counts(o, h, r)
}

/// ROUGE-L from the longest common subsequence.
pub fn rouge_l(hyp: &TokenSeq, reference: &TokenSeq) -> Prf {
    Prf::from_counts(lcs_length(hyp, reference), hyp.len(), reference.len())
}
