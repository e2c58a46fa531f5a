use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::TokenSeq;
use crate::{BOS, EOS, UNK};

pub const UNK_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;

/// Token ↔ id table. Ids 0, 1, 2 are `<unk>`, `<s>`, `</s>`; the rest are
/// ordered by descending corpus frequency, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from a corpus. `limit` bounds the total size,
    /// specials included; exceeding it is an error.
    pub fn build<'a>(seqs: impl Iterator<Item = &'a TokenSeq>, limit: Option<usize>) -> Result<Self> {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for s in seqs {
            for t in s.iter() {
                if t != UNK && t != BOS && t != EOS {
                    *freq.entry(t.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut words: Vec<(&str, usize)> = freq.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let size = words.len() + 3;
        if let Some(limit) = limit {
            if size > limit {
                return Err(Error::VocabularyOverflow { size, limit });
            }
        }
        let tokens = [UNK, BOS, EOS].into_iter().chain(words.into_iter().map(|(w, _)| w)).map(str::to_owned).collect();
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[UNK_ID] != UNK || tokens[BOS_ID] != BOS || tokens[EOS_ID] != EOS {
            return Err(Error::Checkpoint("vocabulary must start with <unk> <s> </s>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Checkpoint(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `tok`, or [`UNK_ID`].
    pub fn id(&self, tok: &str) -> usize {
        self.index.get(tok).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, tok: &str) -> Option<usize> {
        self.index.get(tok).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_specials() {
        let v = Vocab::build([TokenSeq::from_text("b a b c </s>")].iter(), None).unwrap();
        assert_eq!(v.tokens(), &["<unk>", "<s>", "</s>", "b", "a", "c"]);
        assert_eq!(v.id("zzz"), UNK_ID);
        assert_eq!(v.id("b"), 3);
    }

    #[test]
    fn overflow() {
        let err = Vocab::build([TokenSeq::from_text("a b c")].iter(), Some(5)).unwrap_err();
        assert!(matches!(err, Error::VocabularyOverflow { size: 6, limit: 5 }));
        assert!(Vocab::build([TokenSeq::from_text("a b c")].iter(), Some(6)).is_ok());
    }
}
