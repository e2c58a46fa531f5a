use std::collections::BTreeMap;

use super::{parse_penman, AmrGraph};
use crate::error::Result;

/// One entry of an AMR release file: `# ::key value` metadata lines followed
/// by a PENMAN expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrBlock {
    pub metadata: BTreeMap<String, String>,
    pub penman: String,
    /// 1-based line of the block's first line.
    pub line: usize,
}

impl AmrBlock {
    pub fn id(&self) -> Option<&str> {
        self.metadata.get("id").map(String::as_str)
    }

    pub fn sentence(&self) -> Option<&str> {
        self.metadata.get("snt").map(String::as_str)
    }

    /// The id if present, otherwise a `line:<n>` label for diagnostics.
    pub fn label(&self) -> String {
        self.id().map_or_else(|| format!("line:{}", self.line), str::to_owned)
    }

    pub fn graph(&self) -> Result<AmrGraph> {
        parse_penman(&self.penman)
    }
}

fn parse_metadata(comment: &str, into: &mut BTreeMap<String, String>) {
    // `# ::id x ::date y` or `# ::snt free text`
    let body = comment.trim_start_matches('#');
    // Split at every "::" that starts a field (preceded by whitespace).
    let bytes = body.as_bytes();
    let mut starts = Vec::new();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if bytes[i] == b':' && bytes[i + 1] == b':' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            starts.push(i);
            i += 2;
        } else {
            i += 1;
        }
    }
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(body.len());
        let field = body[s + 2..end].trim();
        let (key, value) = field.split_once(char::is_whitespace).unwrap_or((field, ""));
        if key.is_empty() {
            continue;
        }
        // `::snt` carries free text that may itself contain "::"
        if key == "snt" || key == "tok" {
            let value = body[s + 2 + key.len()..].trim();
            into.insert(key.to_owned(), value.to_owned());
            break;
        }
        into.insert(key.to_owned(), value.trim().to_owned());
    }
}

/// Splits AMR release text into blocks. Blocks without a PENMAN body (such
/// as a file-level header comment) are skipped.
pub fn parse_blocks(text: &str) -> Vec<AmrBlock> {
    let mut blocks = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut body = String::new();
    let mut start = None;

    let mut flush = |metadata: &mut BTreeMap<String, String>, body: &mut String, start: &mut Option<usize>| {
        if !body.trim().is_empty() {
            blocks.push(AmrBlock {
                metadata: std::mem::take(metadata),
                penman: body.trim().to_owned(),
                line: start.unwrap_or(1),
            });
        }
        metadata.clear();
        body.clear();
        *start = None;
    };

    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut metadata, &mut body, &mut start);
            continue;
        }
        start.get_or_insert(n + 1);
        if trimmed.starts_with('#') {
            if body.is_empty() {
                parse_metadata(trimmed, &mut metadata);
            }
            continue;
        }
        body.push_str(line);
        body.push('\n');
    }
    flush(&mut metadata, &mut body, &mut start);
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = "# AMR release; corpus: proxy\n\n\
# ::id PROXY_1.1 ::date 2008 ::snt-type body\n\
# ::snt Russia conducted airstrikes .\n\
(c / conduct-01\n   :ARG0 (c2 / country))\n\n\n\
# ::id PROXY_1.2\n\
(a / apple)\n";

    #[test]
    fn splits_and_reads_metadata() {
        let blocks = parse_blocks(FILE);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].id(), Some("PROXY_1.1"));
        assert_eq!(blocks[0].metadata["snt-type"], "body");
        assert_eq!(blocks[0].sentence(), Some("Russia conducted airstrikes ."));
        assert_eq!(blocks[0].line, 3);
        assert_eq!(blocks[0].graph().unwrap().len(), 2);
        assert_eq!(blocks[1].id(), Some("PROXY_1.2"));
        assert_eq!(blocks[1].sentence(), None);
        assert_eq!(blocks[1].label(), "PROXY_1.2");
    }

    #[test]
    fn empty_text() {
        assert!(parse_blocks("").is_empty());
        assert!(parse_blocks("\n\n# just a comment\n").is_empty());
    }
}
