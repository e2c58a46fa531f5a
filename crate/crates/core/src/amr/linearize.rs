use serde::{Deserialize, Serialize};

use super::{AmrGraph, NodeKind};
use crate::error::{Error, Result};
use crate::tokens::TokenSeq;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearizeOptions {
    /// How deep a re-entrant node's subtree is duplicated at each later
    /// mention; at 0 only its concept is repeated.
    pub max_reentrancy_depth: usize,
    pub strip_senses: bool,
    pub strip_wiki: bool,
    pub lowercase: bool,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        Self { max_reentrancy_depth: 1, strip_senses: true, strip_wiki: true, lowercase: true }
    }
}

impl LinearizeOptions {
    /// Options that keep every label untouched.
    pub fn verbatim() -> Self {
        Self { max_reentrancy_depth: 1, strip_senses: false, strip_wiki: false, lowercase: false }
    }
}

fn strip_sense(concept: &str) -> &str {
    match concept.rfind('-') {
        Some(i) if i > 0 && i + 1 < concept.len() && concept[i + 1..].bytes().all(|b| b.is_ascii_digit()) => {
            &concept[..i]
        }
        _ => concept,
    }
}

struct Writer<'a> {
    graph: &'a AmrGraph,
    opts: &'a LinearizeOptions,
    out: TokenSeq,
    expanded: Vec<bool>,
}

impl Writer<'_> {
    fn push(&mut self, tok: &str) {
        let tok = if self.opts.lowercase { tok.to_lowercase() } else { tok.to_owned() };
        self.out.push_unchecked(tok);
    }

    fn concept(&mut self, n: usize) {
        let node = self.graph.node(n);
        let label = match node.kind {
            NodeKind::Variable if self.opts.strip_senses => strip_sense(&node.concept),
            _ => node.concept.as_str(),
        };
        let tok = if label.is_empty() {
            "\"\"".to_owned()
        } else {
            label.split_whitespace().collect::<Vec<_>>().join("_")
        };
        let tok = if tok.is_empty() { "_".to_owned() } else { tok };
        self.push(&tok);
    }

    fn children(&self, n: usize) -> Vec<(String, usize)> {
        self.graph
            .out_edges(n)
            .filter(|e| !(self.opts.strip_wiki && e.role.eq_ignore_ascii_case("wiki")))
            .map(|e| (format!(":{}", e.role), e.target))
            .collect()
    }

    fn visit(&mut self, n: usize) {
        if self.graph.node(n).is_constant() {
            self.concept(n);
            return;
        }
        if self.expanded[n] {
            self.duplicate(n, self.opts.max_reentrancy_depth);
            return;
        }
        self.expanded[n] = true;
        self.push("(");
        self.concept(n);
        for (role, target) in self.children(n) {
            self.push(&role);
            self.visit(target);
        }
        self.push(")");
    }

    fn duplicate(&mut self, n: usize, depth: usize) {
        if depth == 0 || self.graph.node(n).is_constant() {
            self.concept(n);
            return;
        }
        self.push("(");
        self.concept(n);
        for (role, target) in self.children(n) {
            self.push(&role);
            self.duplicate(target, depth - 1);
        }
        self.push(")");
    }
}

/// Flattens `graph` into a token sequence by a depth-first walk from the root.
///
/// Each variable node is written as `( concept :role child ... )`, constants
/// as bare tokens, and variable ids are dropped. Children follow edge order.
pub fn linearize(graph: &AmrGraph, opts: &LinearizeOptions) -> Result<TokenSeq> {
    let unreachable = graph.unreachable();
    if !unreachable.is_empty() {
        return Err(Error::Disconnected(unreachable));
    }
    let mut w = Writer { graph, opts, out: TokenSeq::empty(), expanded: vec![false; graph.len()] };
    w.visit(graph.root());
    Ok(w.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amr::{parse_penman, Edge, Node};

    const WANT: &str = "(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))";

    fn lin(text: &str, opts: &LinearizeOptions) -> String {
        linearize(&parse_penman(text).unwrap(), opts).unwrap().to_string()
    }

    #[test]
    fn single_node() {
        assert_eq!(lin("(a / apple)", &LinearizeOptions::default()), "( apple )");
    }

    #[test]
    fn reentrancy_depth_zero() {
        let opts = LinearizeOptions { max_reentrancy_depth: 0, strip_senses: true, strip_wiki: true, lowercase: false };
        assert_eq!(lin(WANT, &opts), "( want :ARG0 ( boy ) :ARG1 ( go :ARG0 boy ) )");
    }

    #[test]
    fn reentrancy_depth_two_duplicates_subtree() {
        let text = "(a / and :op1 (s / see-01 :ARG0 (b / boy :mod (t / tall))) :op2 (r / run-02 :ARG0 s))";
        let mut opts = LinearizeOptions { max_reentrancy_depth: 1, ..LinearizeOptions::default() };
        assert_eq!(lin(text, &opts), "( and :op1 ( see :arg0 ( boy :mod ( tall ) ) ) :op2 ( run :arg0 ( see :arg0 boy ) ) )");
        opts.max_reentrancy_depth = 2;
        assert_eq!(
            lin(text, &opts),
            "( and :op1 ( see :arg0 ( boy :mod ( tall ) ) ) :op2 ( run :arg0 ( see :arg0 ( boy :mod tall ) ) ) )"
        );
    }

    #[test]
    fn wiki_senses_and_case() {
        let text = r#"(c / country :wiki "Russia" :name (n / name :op1 "Russia") :ARG0-of (a / attack-01))"#;
        assert_eq!(lin(text, &LinearizeOptions::default()), "( country :name ( name :op1 russia ) :arg0-of ( attack ) )");
        assert_eq!(
            lin(text, &LinearizeOptions::verbatim()),
            "( country :wiki Russia :name ( name :op1 Russia ) :ARG0-of ( attack-01 ) )"
        );
    }

    #[test]
    fn multiword_constants_stay_single_tokens() {
        let seq = linearize(&parse_penman(r#"(n / name :op1 "New  York")"#).unwrap(), &LinearizeOptions::verbatim()).unwrap();
        assert_eq!(seq.to_string(), "( name :op1 New_York )");
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = AmrGraph::new(
            vec![
                Node { id: "a".into(), concept: "x".into(), kind: NodeKind::Variable },
                Node { id: "b".into(), concept: "y".into(), kind: NodeKind::Variable },
            ],
            vec![Edge { source: 1, role: "ARG0".into(), target: 0 }],
            0,
        )
        .unwrap();
        match linearize(&g, &LinearizeOptions::default()) {
            Err(Error::Disconnected(ids)) => assert_eq!(ids, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_and_sense_stripping_edge_cases() {
        assert_eq!(strip_sense("have-org-role-91"), "have-org-role");
        assert_eq!(strip_sense("-"), "-");
        assert_eq!(strip_sense("x-"), "x-");
        assert_eq!(strip_sense("well-being"), "well-being");
        assert_eq!(lin(WANT, &Default::default()), lin(WANT, &Default::default()));
    }
}
