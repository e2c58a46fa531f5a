//! Maximum-likelihood n-gram counts over side information and the
//! interpolated side probability built from them.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::side_info::SideDocument;
use crate::tokens::TokenSeq;
use crate::{BOS, EOS};

/// Order used for the side model: 4-grams, i.e. three tokens of context.
pub const SIDE_ORDER: usize = 4;

/// Default ratio between successive interpolation weights.
pub const DEFAULT_THETA: f64 = 2.5;

/// Unsmoothed n-gram counts of orders `1..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    max_order: usize,
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    counts: HashMap<Vec<u32>, u64>,
    unigram_total: u64,
}

impl NGramModel {
    /// Counts every n-gram of order `1..=max_order` inside each sentence after
    /// padding it with `max_order - 1` begin markers and one end marker.
    pub fn from_sentences(sentences: &[TokenSeq], max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        let mut model = NGramModel {
            max_order,
            ids: HashMap::new(),
            tokens: Vec::new(),
            counts: HashMap::new(),
            unigram_total: 0,
        };
        model.intern(BOS);
        model.intern(EOS);
        for sent in sentences {
            let mut padded = vec![model.ids[BOS]; max_order - 1];
            padded.extend(sent.iter().map(|t| model.intern(t)));
            padded.push(model.ids[EOS]);
            for start in 0..padded.len() {
                for n in 1..=max_order.min(padded.len() - start) {
                    *model.counts.entry(padded[start..start + n].to_vec()).or_insert(0) += 1;
                }
            }
            model.unigram_total += padded.len() as u64;
        }
        Ok(model)
    }

    fn intern(&mut self, tok: &str) -> u32 {
        if let Some(&id) = self.ids.get(tok) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.ids.insert(tok.to_owned(), id);
        self.tokens.push(tok.to_owned());
        id
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Observed surface tokens plus the two sentence markers, sorted.
    pub fn vocab(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    pub fn contains(&self, tok: &str) -> bool {
        self.ids.contains_key(tok)
    }

    pub fn unigram_total(&self) -> u64 {
        self.unigram_total
    }

    fn key<S: AsRef<str>>(&self, toks: &[S]) -> Option<Vec<u32>> {
        toks.iter().map(|t| self.ids.get(t.as_ref()).copied()).collect()
    }

    /// Count of an n-gram; 0 when unseen or longer than `max_order`.
    pub fn count<S: AsRef<str>>(&self, ngram: &[S]) -> u64 {
        if ngram.is_empty() {
            return self.unigram_total;
        }
        self.key(ngram).and_then(|k| self.counts.get(&k).copied()).unwrap_or(0)
    }

    /// `count(context ++ word) / count(context)`, or 0 for an unseen context.
    /// An empty context gives the unigram relative frequency.
    pub fn p_lm<S: AsRef<str>>(&self, word: &str, context: &[S]) -> f64 {
        let denom = self.count(context);
        if denom == 0 {
            return 0.0;
        }
        let mut full: Vec<&str> = context.iter().map(AsRef::as_ref).collect();
        full.push(word);
        self.count(&full) as f64 / denom as f64
    }

    /// Interpolated side probability of `word` given the preceding tokens.
    ///
    /// Only the last three entries of `history` are used; shorter histories
    /// are padded on the left with begin markers.
    pub fn p_side<S: AsRef<str>>(&self, word: &str, history: &[S], weights: &InterpolationWeights) -> f64 {
        let mut ctx: Vec<&str> = vec![BOS; 3usize.saturating_sub(history.len())];
        ctx.extend(history[history.len().saturating_sub(3)..].iter().map(AsRef::as_ref));
        let [l1, l2, l3] = weights.lambdas;
        l3 * self.p_lm(word, &ctx[0..3]) + l2 * self.p_lm(word, &ctx[1..3]) + l1 * self.p_lm(word, &ctx[2..3])
    }

    /// All stored n-grams with their counts, sorted lexicographically by
    /// token tuple.
    pub fn entries(&self) -> Vec<(Vec<&str>, u64)> {
        let mut out: Vec<(Vec<&str>, u64)> = self
            .counts
            .iter()
            .map(|(k, &c)| (k.iter().map(|&i| self.tokens[i as usize].as_str()).collect(), c))
            .collect();
        out.sort();
        out
    }

    /// Plain-text dump, one `<count> <tok1> ... <tokn>` line per n-gram.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (toks, c) in self.entries() {
            let _ = writeln!(out, "{c} {}", toks.join(" "));
        }
        out
    }
}

/// Builds the count tables for a side document.
pub fn build_counts(side: &SideDocument, max_order: usize) -> Result<NGramModel> {
    NGramModel::from_sentences(&side.sentences, max_order)
}

/// Weights `(λ1, λ2, λ3)` of the bigram, trigram and 4-gram terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationWeights {
    pub lambdas: [f64; 3],
    pub theta: f64,
}

impl Default for InterpolationWeights {
    fn default() -> Self {
        lambdas_from_theta(DEFAULT_THETA).expect("default theta is positive")
    }
}

/// The geometric family `λ(i+1) = θ·λi` normalised to sum to one.
pub fn lambdas_from_theta(theta: f64) -> Result<InterpolationWeights> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be a positive finite number, got {theta}")));
    }
    let l1 = 1.0 / (1.0 + theta + theta * theta);
    Ok(InterpolationWeights { lambdas: [l1, theta * l1, theta * theta * l1], theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::side_info::oracle_side;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_text(s)
    }

    #[test]
    fn bigram_hand_count() {
        let m = NGramModel::from_sentences(&[seq("a b")], 2).unwrap();
        let expected = [
            (vec!["</s>"], 1),
            (vec!["<s>"], 1),
            (vec!["<s>", "a"], 1),
            (vec!["a"], 1),
            (vec!["a", "b"], 1),
            (vec!["b"], 1),
            (vec!["b", "</s>"], 1),
        ];
        let got: Vec<(Vec<&str>, u64)> = m.entries();
        assert_eq!(got, expected.iter().map(|(k, c)| (k.clone(), *c as u64)).collect::<Vec<_>>());
        assert_eq!(m.unigram_total(), 4);
    }

    #[test]
    fn repeated_token() {
        let m = NGramModel::from_sentences(&[seq("a a a")], 2).unwrap();
        assert_eq!(m.count(&["a"]), 3);
        assert_eq!(m.count(&["a", "a"]), 2);
    }

    #[test]
    fn p_lm_examples() {
        let m = NGramModel::from_sentences(&[seq("a b a b")], 4).unwrap();
        assert_eq!(m.p_lm("b", &["a"]), 1.0);
        assert_eq!(m.p_lm("b", &["zzz"]), 0.0);
        assert_eq!(m.p_lm("a", &["b", "b"]), 0.0);
        let empty: [&str; 0] = [];
        assert!((m.p_lm("a", &empty) - 2.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn p_side_examples() {
        let m = NGramModel::from_sentences(&[seq("a b a b")], 4).unwrap();
        let w = lambdas_from_theta(1.0).unwrap();
        assert_eq!(m.p_side("zzz", &["a"], &w), 0.0);
        // 4-gram and trigram contexts (x y a), (y a) are unseen for x, y = unseen
        let p = m.p_side("b", &["q", "r", "a"], &w);
        assert!((p - 1.0 / 3.0).abs() < 1e-12, "{p}");
    }

    #[test]
    fn lambdas() {
        let w = lambdas_from_theta(1.0).unwrap();
        for l in w.lambdas {
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = lambdas_from_theta(2.5).unwrap();
        assert!((w.lambdas[0] - 1.0 / 9.75).abs() < 1e-15);
        assert!((w.lambdas[1] / w.lambdas[0] - 2.5).abs() < 1e-12);
        assert!((w.lambdas[2] / w.lambdas[1] - 2.5).abs() < 1e-12);
        assert!(lambdas_from_theta(0.0).is_err());
        assert!(lambdas_from_theta(-1.0).is_err());
        assert!(lambdas_from_theta(f64::NAN).is_err());
    }

    #[test]
    fn oracle_counts_equal_direct_counts() {
        let sents = vec![seq("on 8 august russia conducted airstrikes"), seq("targets were hit")];
        let via_side = build_counts(&oracle_side(&sents).unwrap(), 4).unwrap();
        let direct = NGramModel::from_sentences(&sents, 4).unwrap();
        assert_eq!(via_side.dump(), direct.dump());
    }

    #[test]
    fn zero_order_rejected() {
        assert!(NGramModel::from_sentences(&[seq("a")], 0).is_err());
    }
}
