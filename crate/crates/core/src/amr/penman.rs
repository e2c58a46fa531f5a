use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use super::{AmrGraph, Edge, Node, NodeKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Symbol(String),
    Str(String),
}

fn perr(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '/' | '"')
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push((i, Tok::Open));
            }
            ')' => {
                chars.next();
                out.push((i, Tok::Close));
            }
            '/' => {
                chars.next();
                out.push((i, Tok::Slash));
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '\\' => match chars.next() {
                            Some((_, e)) => s.push(e),
                            None => break,
                        },
                        '"' => {
                            closed = true;
                            break;
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(perr(i, "unterminated string literal"));
                }
                out.push((i, Tok::Str(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if is_delim(c) {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                if let Some(role) = s.strip_prefix(':') {
                    if role.is_empty() {
                        return Err(perr(i, "empty role name"));
                    }
                    out.push((i, Tok::Role(role.to_owned())));
                } else {
                    out.push((i, Tok::Symbol(s)));
                }
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    introduced: HashSet<&'a str>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<String, usize>,
    constants: usize,
    forward: Vec<(usize, String)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a (usize, Tok)> {
        self.toks.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.0)
    }

    fn next(&mut self) -> Option<&'a (usize, Tok)> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn fresh_constant_id(&mut self) -> String {
        loop {
            let id = format!("_c{}", self.constants);
            self.constants += 1;
            if !self.introduced.contains(id.as_str()) {
                return id;
            }
        }
    }

    fn add_constant(&mut self, concept: String, kind: NodeKind) -> usize {
        let id = self.fresh_constant_id();
        let idx = self.nodes.len();
        self.index.insert(id.clone(), idx);
        self.nodes.push(Node { id, concept, kind });
        idx
    }

    /// Parses `( var / concept (:role target)* )`, the opening paren included.
    fn node(&mut self) -> Result<usize> {
        let open_at = self.offset();
        match self.next() {
            Some((_, Tok::Open)) => {}
            _ => return Err(perr(open_at, "expected '('")),
        }
        let var_at = self.offset();
        let var = match self.next() {
            Some((_, Tok::Symbol(s))) => s.clone(),
            _ => return Err(perr(var_at, "expected a variable after '('")),
        };
        if self.index.contains_key(&var) {
            return Err(perr(var_at, format!("duplicate variable {var:?}")));
        }
        let slash_at = self.offset();
        match self.next() {
            Some((_, Tok::Slash)) => {}
            _ => return Err(perr(slash_at, format!("expected '/' after new variable {var:?}"))),
        }
        let concept_at = self.offset();
        let concept = match self.next() {
            Some((_, Tok::Symbol(s))) | Some((_, Tok::Str(s))) => s.clone(),
            _ => return Err(perr(concept_at, format!("expected a concept for variable {var:?}"))),
        };
        let idx = self.nodes.len();
        self.index.insert(var.clone(), idx);
        self.nodes.push(Node { id: var, concept, kind: NodeKind::Variable });

        loop {
            let at = self.offset();
            match self.next() {
                Some((_, Tok::Close)) => return Ok(idx),
                Some((_, Tok::Role(role))) => {
                    // Reserve the slot first so edges keep textual order.
                    let edge = self.edges.len();
                    self.edges.push(Edge { source: idx, role: role.clone(), target: usize::MAX });
                    match self.target(role)? {
                        Target::Node(target) => self.edges[edge].target = target,
                        Target::Forward(var) => self.forward.push((edge, var)),
                    }
                }
                Some(_) => return Err(perr(at, "expected a role or ')'")),
                None => return Err(perr(at, format!("unbalanced parentheses: '(' at byte {open_at} is never closed"))),
            }
        }
    }

    fn target(&mut self, role: &str) -> Result<Target> {
        let at = self.offset();
        match self.peek() {
            Some((_, Tok::Open)) => self.node().map(Target::Node),
            Some((_, Tok::Symbol(s))) => {
                self.pos += 1;
                if self.introduced.contains(s.as_str()) {
                    // Re-entrant mention; the introduction may come later in the text.
                    Ok(match self.index.get(s) {
                        Some(&i) => Target::Node(i),
                        None => Target::Forward(s.clone()),
                    })
                } else {
                    Ok(Target::Node(self.add_constant(s.clone(), NodeKind::Constant)))
                }
            }
            Some((_, Tok::Str(s))) => {
                self.pos += 1;
                Ok(Target::Node(self.add_constant(s.clone(), NodeKind::Quoted)))
            }
            _ => Err(perr(at, format!("dangling relation :{role}"))),
        }
    }
}

enum Target {
    Node(usize),
    Forward(String),
}

/// Parses a single PENMAN expression into an [`AmrGraph`].
///
/// Each `(var / concept ...)` introduces one node; each string, number or
/// other bare constant becomes its own leaf node. A bare symbol naming a
/// variable introduced anywhere in the expression is a re-entrant edge to
/// that node.
pub fn parse_penman(text: &str) -> Result<AmrGraph> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(perr(0, "empty input"));
    }
    let mut introduced = HashSet::new();
    for w in toks.windows(2) {
        if let (Tok::Open, Tok::Symbol(s)) = (&w[0].1, &w[1].1) {
            introduced.insert(s.as_str());
        }
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        introduced,
        nodes: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
        constants: 0,
        forward: Vec::new(),
    };
    let root = p.node()?;
    if let Some((at, _)) = p.peek() {
        return Err(perr(*at, "unexpected content after the closing ')'"));
    }
    for (edge, var) in std::mem::take(&mut p.forward) {
        p.edges[edge].target = p.index[&var];
    }
    AmrGraph::new(p.nodes, p.edges, root)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Serializes the part of `graph` reachable from its root as PENMAN.
///
/// Children are written in edge order; a variable node's first visit in the
/// depth-first walk carries its concept, later visits are bare references.
pub fn to_penman(graph: &AmrGraph) -> String {
    fn walk(g: &AmrGraph, n: usize, seen: &mut [bool], out: &mut String) {
        let node = g.node(n);
        match node.kind {
            NodeKind::Quoted => out.push_str(&quote(&node.concept)),
            NodeKind::Constant => out.push_str(&node.concept),
            NodeKind::Variable if seen[n] => out.push_str(&node.id),
            NodeKind::Variable => {
                seen[n] = true;
                let concept = if node.concept.chars().any(is_delim) || node.concept.starts_with(':') {
                    quote(&node.concept)
                } else {
                    node.concept.clone()
                };
                let _ = write!(out, "({} / {}", node.id, concept);
                for e in g.out_edges(n) {
                    let _ = write!(out, " :{} ", e.role);
                    walk(g, e.target, seen, out);
                }
                out.push(')');
            }
        }
    }
    let mut seen = vec![false; graph.len()];
    let mut out = String::new();
    walk(graph, graph.root(), &mut seen, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_graph() {
        let g = parse_penman("(a / apple)").unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.edges().is_empty());
        assert_eq!(g.root_node().id, "a");
        assert_eq!(g.root_node().concept, "apple");
    }

    #[test]
    fn reentrancy_shares_the_node() {
        let g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges().len(), 3);
        let boy = g.index_of("b").unwrap();
        let arg0: Vec<_> = g.edges().iter().filter(|e| e.role == "ARG0").collect();
        assert_eq!(arg0.len(), 2);
        assert!(arg0.iter().all(|e| e.target == boy));
        assert!(g.is_connected());
    }

    #[test]
    fn forward_reference() {
        let g = parse_penman("(w / want-01 :ARG1 (g / go-01 :ARG0 b) :ARG0 (b / boy))").unwrap();
        assert_eq!(g.len(), 3);
        let boy = g.index_of("b").unwrap();
        assert_eq!(g.edges()[1].target, boy);
        assert_eq!(g.edges()[2].target, boy);
    }

    #[test]
    fn constants_are_leaf_nodes() {
        let g = parse_penman(r#"(c / country :name (n / name :op1 "New York") :polarity - :quant 12.5)"#).unwrap();
        assert_eq!(g.len(), 5);
        let concepts: Vec<_> = g.nodes().iter().map(|n| (n.concept.as_str(), n.kind)).collect();
        assert!(concepts.contains(&("New York", NodeKind::Quoted)));
        assert!(concepts.contains(&("-", NodeKind::Constant)));
        assert!(concepts.contains(&("12.5", NodeKind::Constant)));
    }

    #[test]
    fn duplicate_variable() {
        let err = parse_penman("(a / apple :rel (a / pear))").unwrap_err();
        match err {
            Error::Parse { offset, message } => {
                assert_eq!(offset, 17);
                assert!(message.contains("duplicate"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_inputs_name_offsets() {
        let cases = [
            ("(a / apple", 10),
            ("(a apple)", 3),
            ("(a / apple :ARG0)", 16),
            ("(a / apple :ARG0", 16),
            ("(a / apple))", 11),
            ("", 0),
            ("(a / \"x)", 5),
        ];
        for (text, want) in cases {
            match parse_penman(text) {
                Err(Error::Parse { offset, .. }) => assert_eq!(offset, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn printer_round_trip() {
        let src = r#"(w / want-01 :ARG0 (b / boy :name (n / name :op1 "Bo \"B\"")) :ARG1 (g / go-01 :ARG0 b :polarity -))"#;
        let g = parse_penman(src).unwrap();
        let printed = to_penman(&g);
        let back = parse_penman(&printed).unwrap();
        assert_eq!(g.concept_multiset(), back.concept_multiset());
        assert_eq!(g.edge_label_multiset(), back.edge_label_multiset());
        assert_eq!(printed, to_penman(&back));
    }
}
