//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use amrsum_core::amr::{parse_penman, AmrGraph};
use amrsum_core::corpus::DocumentRecord;
use amrsum_core::TokenSeq;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Copy task: `n` random sequences over `vocab` symbols, length 1..=max_len.
pub fn copy_corpus(n: usize, vocab: usize, max_len: usize, seed: u64) -> Vec<(TokenSeq, TokenSeq)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let toks: Vec<String> = (0..len).map(|_| format!("s{}", rng.gen_range(0..vocab))).collect();
            let seq = TokenSeq::new(toks).unwrap();
            (seq.clone(), seq)
        })
        .collect()
}

/// A toy language in which every concept has several interchangeable
/// surface words. Training sentences pick a word uniformly at random per
/// mention; within one document each concept always uses the same word, so
/// a decoder can only resolve the choice from side information.
pub struct ToyLanguage {
    pub preds: usize,
    pub ents: usize,
    pub variants: usize,
}

/// `(predicate, agent, patient)` indices.
pub type Event = (usize, usize, usize);

impl ToyLanguage {
    pub fn new() -> Self {
        Self { preds: 6, ents: 8, variants: 3 }
    }

    pub fn random_event(&self, rng: &mut ChaCha8Rng) -> Event {
        let a = rng.gen_range(0..self.ents);
        let mut b = rng.gen_range(0..self.ents - 1);
        if b >= a {
            b += 1;
        }
        (rng.gen_range(0..self.preds), a, b)
    }

    pub fn penman(&self, (p, a, b): Event) -> String {
        format!("(v / act{p}-01 :ARG0 (x / thing{a}) :ARG1 (y / thing{b}))")
    }

    pub fn graph(&self, e: Event) -> AmrGraph {
        parse_penman(&self.penman(e)).unwrap()
    }

    /// Surface form; `choice(concept)` picks the variant index.
    pub fn sentence(&self, (p, a, b): Event, mut choice: impl FnMut(&str) -> usize) -> String {
        let mut word = |c: String| {
            let v = choice(&c);
            format!("{c}{}", (b'a' + v as u8) as char)
        };
        let wa = word(format!("thing{a}"));
        let wp = word(format!("act{p}"));
        let wb = word(format!("thing{b}"));
        format!("the {wa} {wp} the {wb} .")
    }

    /// `(linearization input graph, sentence)` training pairs with random
    /// variants per mention.
    pub fn training_records(&self, n: usize, seed: u64) -> Vec<(String, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let e = self.random_event(&mut rng);
                let v = self.variants;
                let s = self.sentence(e, |_| rng.gen_range(0..v));
                (self.penman(e), s)
            })
            .collect()
    }

    /// Documents of `sentences` source sentences; about half mention a
    /// concept of the summary event.
    pub fn documents(&self, n: usize, sentences: usize, seed: u64) -> Vec<DocumentRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|d| {
                let mut fixed: HashMap<String, usize> = HashMap::new();
                for p in 0..self.preds {
                    fixed.insert(format!("act{p}"), rng.gen_range(0..self.variants));
                }
                for e in 0..self.ents {
                    fixed.insert(format!("thing{e}"), rng.gen_range(0..self.variants));
                }
                let summary = self.random_event(&mut rng);
                let mut events: Vec<Event> = (0..sentences)
                    .map(|i| {
                        let mut e = self.random_event(&mut rng);
                        match i % 3 {
                            0 => e.0 = summary.0,
                            1 if e.0 != summary.0 => {
                                e = (e.0, summary.1, summary.2);
                            }
                            _ => {}
                        }
                        e
                    })
                    .collect();
                events.shuffle(&mut rng);
                let realize = |e: Event| self.sentence(e, |c| fixed[c]);
                DocumentRecord {
                    id: format!("doc{d}"),
                    sentences: events.iter().map(|&e| realize(e)).collect(),
                    amrs: events.iter().map(|&e| self.penman(e)).collect(),
                    summary: realize(summary),
                    summary_amr: self.penman(summary),
                }
            })
            .collect()
    }
}

/// AMR release text for `(penman, sentence)` pairs.
pub fn amr_file(records: &[(String, String)]) -> String {
    records
        .iter()
        .enumerate()
        .map(|(i, (g, s))| format!("# ::id t.{i}\n# ::snt {s}\n{g}\n"))
        .collect::<Vec<_>>()
        .join("\n")
}
