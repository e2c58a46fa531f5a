//! AMR-based abstractive summarization with guided text generation.
//!
//! The crate covers the whole pipeline: PENMAN parsing and linearization of
//! AMR graphs ([`amr`]), side-information selection ([`side_info`]), an
//! interpolated maximum-likelihood n-gram model over that side information
//! ([`ngram`]), a small attention encoder-decoder ([`s2s`]), beam search that
//! fuses the two ([`decode`]), summary-subgraph extraction ([`summarize`]),
//! BLEU/ROUGE scoring ([`metrics`]) and the batch runner behind the `amrsum`
//! binary ([`cli`]).

pub mod amr;
pub mod cli;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod metrics;
pub mod ngram;
pub mod s2s;
pub mod side_info;
pub mod summarize;
pub mod tokens;

pub use amr::{linearize, merge_graphs, parse_penman, AmrGraph, LinearizeOptions};
pub use decode::{beam_search, fused_score, FusionConfig, SideModel};
pub use error::{Error, Result};
pub use metrics::{bleu, rouge_l, rouge_n, MetricReport};
pub use ngram::{lambdas_from_theta, InterpolationWeights, NGramModel};
pub use s2s::{Seq2SeqParams, TrainConfig};
pub use side_info::{lcs_length, oracle_side, select_side_sentences, SideDocument};
pub use tokens::TokenSeq;

/// Begin-of-sentence marker shared by the n-gram model and the decoder.
pub const BOS: &str = "<s>";
/// End-of-sentence marker shared by the n-gram model and the decoder.
pub const EOS: &str = "</s>";
/// Out-of-vocabulary token of the seq2seq vocabularies.
pub const UNK: &str = "<unk>";
