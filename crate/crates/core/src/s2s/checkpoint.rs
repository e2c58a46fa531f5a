use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dims, Seq2SeqParams, Vocab, Weights};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "amrsum-seq2seq";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    dims: Dims,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    weights: Weights,
}

impl Seq2SeqParams {
    /// JSON checkpoint: format tag, version, dimensions, both vocabularies and
    /// every tensor with its shape. Floats round-trip exactly.
    pub fn to_checkpoint(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            dims: self.dims,
            src_vocab: self.src_vocab.clone(),
            tgt_vocab: self.tgt_vocab.clone(),
            weights: self.weights.clone(),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", ck.version)));
        }
        let p = Seq2SeqParams { src_vocab: ck.src_vocab, tgt_vocab: ck.tgt_vocab, dims: ck.dims, weights: ck.weights };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}
