//! Document corpora: JSON lines with one document per line, and the mapping
//! from LDC-style AMR release blocks onto the same shape.
//!
//! ```text
//! {"id": "d1", "sentences": ["..."], "amrs": ["(x / ...)"], "summary": "...", "summary_amr": "(y / ...)"}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amr::{parse_penman, AmrBlock, AmrGraph};
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

/// One line of a document corpus, as stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub amrs: Vec<String>,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub summary_amr: String,
}

/// A parsed document.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    /// `(sentence, parse)` pairs; empty when the record carried no parses.
    pub sentences: Vec<(TokenSeq, AmrGraph)>,
    pub raw_sentences: Vec<TokenSeq>,
    /// Gold summary sentences, one per line of the `summary` field.
    pub summary: Vec<TokenSeq>,
    pub summary_graph: Option<AmrGraph>,
}

impl Document {
    pub fn has_parses(&self) -> bool {
        !self.sentences.is_empty()
    }

    /// All gold summary tokens as one sequence.
    pub fn summary_tokens(&self) -> TokenSeq {
        TokenSeq::from_vec_unchecked(self.summary.iter().flat_map(|s| s.iter().cloned()).collect())
    }
}

/// Whitespace tokenization, optionally lowercased.
pub fn tokenize(text: &str, lowercase: bool) -> TokenSeq {
    if lowercase {
        TokenSeq::from_text(&text.to_lowercase())
    } else {
        TokenSeq::from_text(text)
    }
}

impl DocumentRecord {
    pub fn into_document(self, lowercase: bool) -> Result<Document> {
        let id = self.id;
        let raw_sentences: Vec<TokenSeq> = self.sentences.iter().map(|s| tokenize(s, lowercase)).collect();
        if let Some(i) = raw_sentences.iter().position(|s| s.is_empty()) {
            return Err(Error::Data(format!("document {id:?}: sentence {i} is empty")));
        }
        let sentences = if self.amrs.is_empty() {
            Vec::new()
        } else {
            if self.amrs.len() != raw_sentences.len() {
                return Err(Error::Data(format!(
                    "document {id:?}: {} sentences but {} parses",
                    raw_sentences.len(),
                    self.amrs.len()
                )));
            }
            let graphs = self
                .amrs
                .iter()
                .enumerate()
                .map(|(i, p)| parse_penman(p).map_err(|e| Error::Data(format!("document {id:?}, parse {i}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            raw_sentences.iter().cloned().zip(graphs).collect()
        };
        let summary = self.summary.lines().map(|l| tokenize(l, lowercase)).filter(|s| !s.is_empty()).collect();
        let summary_graph = if self.summary_amr.trim().is_empty() {
            None
        } else {
            Some(parse_penman(&self.summary_amr).map_err(|e| Error::Data(format!("document {id:?}, summary parse: {e}")))?)
        };
        Ok(Document { id, sentences, raw_sentences, summary, summary_graph })
    }
}

/// Parses a JSON-lines corpus. Each non-blank line yields its 1-based line
/// number and either a document or the reason it was rejected.
pub fn parse_documents(text: &str, lowercase: bool) -> Vec<(usize, Result<Document>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let doc = serde_json::from_str::<DocumentRecord>(line)
                .map_err(|e| Error::Data(format!("invalid document record: {e}")))
                .and_then(|r| r.into_document(lowercase));
            (i + 1, doc)
        })
        .collect()
}

/// Groups AMR release blocks into document records.
///
/// Blocks are assigned to the document named by their id up to the last
/// `.` (`PROXY_AFP_ENG_20020105_0162.12` belongs to
/// `PROXY_AFP_ENG_20020105_0162`). Blocks whose `::snt-type` is `summary`
/// form the gold summary; all others are body sentences. Documents keep the
/// order of their first block.
pub fn documents_from_blocks(blocks: &[AmrBlock]) -> Result<Vec<DocumentRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut docs: BTreeMap<String, DocumentRecord> = BTreeMap::new();
    let mut summary_amrs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for b in blocks {
        let id = b.id().ok_or_else(|| Error::Data(format!("block at line {} has no ::id", b.line)))?;
        let doc_id = id.rsplit_once('.').map_or(id, |(d, _)| d).to_owned();
        let snt = b.sentence().ok_or_else(|| Error::Data(format!("block {id} has no ::snt")))?.to_owned();
        let rec = docs.entry(doc_id.clone()).or_insert_with(|| {
            order.push(doc_id.clone());
            DocumentRecord { id: doc_id.clone(), sentences: Vec::new(), amrs: Vec::new(), summary: String::new(), summary_amr: String::new() }
        });
        if b.metadata.get("snt-type").is_some_and(|t| t == "summary") {
            if !rec.summary.is_empty() {
                rec.summary.push('\n');
            }
            rec.summary.push_str(&snt);
            summary_amrs.entry(doc_id).or_default().push(b.penman.clone());
        } else {
            rec.sentences.push(snt);
            rec.amrs.push(b.penman.clone());
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut rec = docs.remove(&id).expect("recorded above");
        match summary_amrs.remove(&id) {
            Some(parses) if parses.len() == 1 => rec.summary_amr = parses.into_iter().next().unwrap(),
            Some(parses) => {
                // several summary sentences: keep them as one multi-sentence graph
                let graphs = parses.iter().map(|p| parse_penman(p)).collect::<Result<Vec<_>>>()?;
                rec.summary_amr = crate::amr::to_penman(&crate::amr::merge_graphs(&graphs)?);
            }
            None => {}
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amr::parse_blocks;

    #[test]
    fn record_round_trip() {
        let line = r#"{"id":"d1","sentences":["The boy slept ."],"amrs":["(s / sleep-01 :ARG0 (b / boy))"],"summary":"boy slept","summary_amr":"(s / sleep-01)"}"#;
        let docs = parse_documents(line, true);
        let doc = docs[0].1.as_ref().unwrap();
        assert_eq!(doc.sentences[0].0.to_string(), "the boy slept .");
        assert_eq!(doc.summary_tokens().to_string(), "boy slept");
        assert_eq!(doc.summary_graph.as_ref().unwrap().len(), 1);
    }

    #[test]
    fn bad_lines_are_reported_individually() {
        let text = "{\"id\":\"a\",\"sentences\":[\"x\"]}\nnot json\n\n{\"id\":\"b\",\"sentences\":[\"y\"],\"amrs\":[\"(a / b\"]}\n";
        let docs = parse_documents(text, true);
        assert_eq!(docs.len(), 3);
        assert!(docs[0].1.is_ok());
        assert!(!docs[0].1.as_ref().unwrap().has_parses());
        assert_eq!(docs[1].0, 2);
        assert!(docs[1].1.is_err());
        assert_eq!(docs[2].0, 4);
        assert!(docs[2].1.is_err());
    }

    #[test]
    fn parse_count_must_match() {
        let r = DocumentRecord {
            id: "d".into(),
            sentences: vec!["a".into(), "b".into()],
            amrs: vec!["(a / a)".into()],
            summary: String::new(),
            summary_amr: String::new(),
        };
        assert!(r.into_document(true).is_err());
    }

    #[test]
    fn blocks_group_into_documents() {
        let text = "\
# ::id D1.1 ::snt-type summary
# ::snt boy sleeps
(s / sleep-01 :ARG0 (b / boy))

# ::id D1.2 ::snt-type body
# ::snt The boy sleeps all day .
(s / sleep-01 :ARG0 (b / boy) :duration (d / day :mod (a / all)))

# ::id D2.1 ::snt-type body
# ::snt Rain .
(r / rain-01)
";
        let docs = documents_from_blocks(&parse_blocks(text)).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "D1");
        assert_eq!(docs[0].summary, "boy sleeps");
        assert_eq!(docs[0].sentences, vec!["The boy sleeps all day ."]);
        assert_eq!(docs[1].summary_amr, "");
        assert!(docs[0].clone().into_document(true).is_ok());
    }
}
