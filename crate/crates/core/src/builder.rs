//! Translation of a marked-up query plus the parse of its example sentence
//! into an executable query graph.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::constraint::{parse_constraint_spec, ConstraintError, Property, TokenConstraint, ValueMatcher};
use crate::corpus::SentenceGraph;
use crate::query::{Capture, QueryTokenSeq};
use crate::steiner::{minimum_steiner_nodes, SteinerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Capture,
    Anchor,
    /// Unmarked word needed to connect the marked ones.
    Connector,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryNode {
    pub id: usize,
    pub name: Option<String>,
    pub constraint: TokenConstraint,
    pub expand: bool,
    pub kind: NodeKind,
    /// Index of the query word that produced this node.
    pub origin: usize,
    pub origin_word: String,
}

impl QueryNode {
    pub fn capture(id: usize, name: impl Into<String>, constraint: TokenConstraint) -> Self {
        QueryNode {
            id,
            name: Some(name.into()),
            constraint,
            expand: false,
            kind: NodeKind::Capture,
            origin: id,
            origin_word: String::new(),
        }
    }

    pub fn connector(id: usize) -> Self {
        QueryNode {
            id,
            name: None,
            constraint: TokenConstraint::any(),
            expand: false,
            kind: NodeKind::Connector,
            origin: id,
            origin_word: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct QueryEdge {
    pub from: usize,
    pub to: usize,
    pub label: String,
}

impl QueryEdge {
    pub fn new(from: usize, to: usize, label: impl Into<String>) -> Self {
        QueryEdge {
            from,
            to,
            label: label.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryGraphError {
    #[error("query graph has no nodes")]
    Empty,
    #[error("node at position {0} has id {1}")]
    NodeId(usize, usize),
    #[error("edge {0:?} refers to a missing node or is a self loop")]
    BadEdge(QueryEdge),
    #[error("edge {0:?} has an empty label")]
    EmptyLabel(QueryEdge),
    #[error("capture name {0:?} is used twice")]
    DuplicateName(String),
    #[error("query graph is not connected")]
    Disconnected,
}

/// Constrained nodes joined by labeled directed edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    nodes: Vec<QueryNode>,
    edges: Vec<QueryEdge>,
}

impl QueryGraph {
    pub fn new(nodes: Vec<QueryNode>, mut edges: Vec<QueryEdge>) -> Result<Self, QueryGraphError> {
        if nodes.is_empty() {
            return Err(QueryGraphError::Empty);
        }
        let mut names = HashSet::new();
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(QueryGraphError::NodeId(i, node.id));
            }
            if let Some(name) = &node.name {
                if !names.insert(name.as_str()) {
                    return Err(QueryGraphError::DuplicateName(name.clone()));
                }
            }
        }
        for e in &edges {
            if e.from >= nodes.len() || e.to >= nodes.len() || e.from == e.to {
                return Err(QueryGraphError::BadEdge(e.clone()));
            }
            if e.label.is_empty() {
                return Err(QueryGraphError::EmptyLabel(e.clone()));
            }
        }
        edges.sort();
        edges.dedup();
        let graph = QueryGraph { nodes, edges };
        if !graph.is_connected() {
            return Err(QueryGraphError::Disconnected);
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[QueryNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[QueryEdge] {
        &self.edges
    }

    pub fn node(&self, id: usize) -> &QueryNode {
        &self.nodes[id]
    }

    /// Capture names in node order, which follows the query words.
    pub fn capture_names(&self) -> Vec<&str> {
        self.nodes.iter().filter_map(|n| n.name.as_deref()).collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    /// JSON-ready view for the service and UI.
    pub fn view(&self) -> GraphView {
        GraphView {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeView {
                    id: n.id,
                    name: n.name.clone(),
                    origin: OriginView {
                        index: n.origin,
                        word: n.origin_word.clone(),
                    },
                    constraint: n.constraint.to_string(),
                    expand: n.expand,
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphView {
    pub nodes: Vec<NodeView>,
    pub edges: Vec<QueryEdge>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeView {
    pub id: usize,
    pub name: Option<String>,
    pub origin: OriginView,
    pub constraint: String,
    pub expand: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OriginView {
    pub index: usize,
    pub word: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("query has {query} words but the parse has {parse} tokens")]
    Alignment { query: usize, parse: usize },
    #[error("{source}")]
    Constraint {
        /// Character offset in the query string.
        position: usize,
        source: ConstraintError,
    },
    #[error("internal error: {0}")]
    Steiner(#[from] SteinerError),
}

/// Smallest set of tokens containing `marked` whose induced subgraph of
/// `sentence` (edge direction ignored) is connected.
pub fn minimal_connected_subgraph(
    sentence: &SentenceGraph,
    marked: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, SteinerError> {
    minimum_steiner_nodes(&sentence.undirected_adjacency(), marked)
}

pub fn build_query_graph(
    seq: &QueryTokenSeq,
    parse: &SentenceGraph,
) -> Result<QueryGraph, BuildError> {
    if seq.len() != parse.len() {
        return Err(BuildError::Alignment {
            query: seq.len(),
            parse: parse.len(),
        });
    }
    let marked: BTreeSet<usize> = seq
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_marked())
        .map(|(i, _)| i)
        .collect();
    let members = minimal_connected_subgraph(parse, &marked)?;

    let mut used: HashSet<String> = seq
        .tokens()
        .iter()
        .filter_map(|t| match &t.capture {
            Capture::Named(n) => Some(n.clone()),
            _ => None,
        })
        .collect();

    let mut node_of = vec![None; parse.len()];
    let mut nodes = Vec::with_capacity(members.len());
    for &i in &members {
        let qt = &seq.tokens()[i];
        let source = parse.token(i);
        let id = nodes.len();
        node_of[i] = Some(id);

        let constraint = match &qt.constraint_spec {
            Some(spec) if qt.is_marked() => {
                parse_constraint_spec(spec, source).map_err(|e| BuildError::Constraint {
                    position: qt.spec_offset.unwrap_or(qt.offset) + e.offset(),
                    source: e,
                })?
            }
            None if qt.is_anchor => TokenConstraint::any()
                .with(Property::Word, ValueMatcher::literals([source.word.clone()])),
            _ => TokenConstraint::any(),
        };
        let (kind, name) = if qt.is_anchor {
            (NodeKind::Anchor, None)
        } else {
            match &qt.capture {
                Capture::None => (NodeKind::Connector, None),
                Capture::Named(n) => (NodeKind::Capture, Some(n.clone())),
                Capture::Auto => (NodeKind::Capture, Some(auto_name(&qt.surface, &mut used))),
            }
        };
        nodes.push(QueryNode {
            id,
            name,
            constraint,
            expand: qt.expand,
            kind,
            origin: i,
            origin_word: qt.surface.clone(),
        });
    }

    let edges = parse
        .edges()
        .iter()
        .filter_map(|e| match (node_of[e.head], node_of[e.dependent]) {
            (Some(from), Some(to)) => Some(QueryEdge::new(from, to, e.label.clone())),
            _ => None,
        })
        .collect();

    // m+ is connected and aligned, so this cannot fail
    Ok(QueryGraph::new(nodes, edges).expect("query graph invariants"))
}

/// Lowercased word, with `_2`, `_3`, ... appended until unused.
fn auto_name(surface: &str, used: &mut HashSet<String>) -> String {
    let base = surface.to_lowercase();
    let mut name = base.clone();
    let mut k = 2;
    while used.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    used.insert(name.clone());
    name
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DepEdge, Token};
    use crate::query::parse_query;

    fn john_wanted() -> SentenceGraph {
        let t = |i, w: &str, l: &str, tag: &str| Token::new(i, w, l, tag);
        SentenceGraph::new(
            "q",
            vec![
                t(0, "John", "John", "NNP"),
                t(1, "wanted", "want", "VBD"),
                t(2, "to", "to", "TO"),
                t(3, "go", "go", "VB"),
                t(4, "home", "home", "NN"),
            ],
            vec![
                DepEdge::new(1, 0, "nsubj"),
                DepEdge::new(1, 3, "xcomp"),
                DepEdge::new(3, 2, "mark"),
                DepEdge::new(3, 4, "dobj"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn wanted_go_home_graph() {
        let seq = parse_query("John w:wanted to v:[tag]go h:[word]home").unwrap();
        let g = build_query_graph(&seq, &john_wanted()).unwrap();
        assert_eq!(g.nodes().len(), 3);
        let names: Vec<_> = g.capture_names();
        assert_eq!(names, ["w", "v", "h"]);
        assert!(g.node(0).constraint.is_any());
        assert_eq!(g.node(1).constraint.to_string(), "tag=VB");
        assert_eq!(g.node(2).constraint.to_string(), "word=home");
        assert_eq!(
            g.edges(),
            [QueryEdge::new(0, 1, "xcomp"), QueryEdge::new(1, 2, "dobj")]
        );
        assert_eq!(g.node(1).origin, 3);
        assert_eq!(g.node(1).origin_word, "go");
    }

    #[test]
    fn value_pulling_is_equivalent() {
        let a = parse_query("John w:wanted to v:[t]go h:[w]home").unwrap();
        let b = parse_query("John w:wanted to v:[tag=VB]go h:[word=home]home").unwrap();
        assert_eq!(
            build_query_graph(&a, &john_wanted()).unwrap(),
            build_query_graph(&b, &john_wanted()).unwrap()
        );
    }

    #[test]
    fn connector_nodes_are_unnamed() {
        let seq = parse_query("j:John wanted to go h:home").unwrap();
        let g = build_query_graph(&seq, &john_wanted()).unwrap();
        // John - wanted - go - home
        assert_eq!(g.nodes().len(), 4);
        assert_eq!(g.node(1).kind, NodeKind::Connector);
        assert_eq!(g.node(1).name, None);
        assert!(g.node(1).constraint.is_any());
        assert_eq!(g.node(2).origin_word, "go");
        assert!(!g.nodes().iter().any(|n| n.origin_word == "to"));
    }

    #[test]
    fn anchor_defaults_and_auto_names() {
        let parse = SentenceGraph::new(
            "q",
            vec![
                Token::new(0, "John", "John", "NNP"),
                Token::new(1, "wanted", "want", "VBD"),
            ],
            vec![DepEdge::new(1, 0, "nsubj")],
        )
        .unwrap();
        let g = build_query_graph(&parse_query("$[]John :wanted").unwrap(), &parse).unwrap();
        assert_eq!(g.node(0).kind, NodeKind::Anchor);
        assert!(g.node(0).constraint.is_any());
        assert_eq!(g.node(1).name.as_deref(), Some("wanted"));

        let g = build_query_graph(&parse_query("$John :wanted").unwrap(), &parse).unwrap();
        assert_eq!(g.node(0).constraint.to_string(), "word=John");
    }

    #[test]
    fn auto_name_collisions() {
        let mut used: HashSet<String> = ["home".to_string()].into_iter().collect();
        assert_eq!(auto_name("Home", &mut used), "home_2");
        assert_eq!(auto_name("home", &mut used), "home_3");
        assert_eq!(auto_name("Go", &mut used), "go");
    }

    #[test]
    fn constraint_error_position() {
        let seq = parse_query("John w:[e]wanted to go home").unwrap();
        let err = build_query_graph(&seq, &john_wanted()).unwrap_err();
        match err {
            BuildError::Constraint { position, source } => {
                assert_eq!(position, 8);
                assert!(matches!(source, ConstraintError::MissingProperty { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_view() {
        let seq = parse_query("John w:wanted to v:[tag]go h:[word]home").unwrap();
        let g = build_query_graph(&seq, &john_wanted()).unwrap();
        let v = serde_json::to_value(g.view()).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "nodes": [
                    {"id": 0, "name": "w", "origin": {"index": 1, "word": "wanted"}, "constraint": "", "expand": false},
                    {"id": 1, "name": "v", "origin": {"index": 3, "word": "go"}, "constraint": "tag=VB", "expand": false},
                    {"id": 2, "name": "h", "origin": {"index": 4, "word": "home"}, "constraint": "word=home", "expand": false}
                ],
                "edges": [
                    {"from": 0, "to": 1, "label": "xcomp"},
                    {"from": 1, "to": 2, "label": "dobj"}
                ]
            })
        );
    }

    #[test]
    fn graph_validation() {
        let a = QueryNode::capture(0, "a", TokenConstraint::any());
        let b = QueryNode::capture(1, "b", TokenConstraint::any());
        assert_eq!(
            QueryGraph::new(vec![a.clone(), b.clone()], vec![]),
            Err(QueryGraphError::Disconnected)
        );
        let dup = QueryNode::capture(1, "a", TokenConstraint::any());
        assert!(matches!(
            QueryGraph::new(vec![a.clone(), dup], vec![QueryEdge::new(0, 1, "x")]),
            Err(QueryGraphError::DuplicateName(_))
        ));
        assert!(QueryGraph::new(vec![a, b], vec![QueryEdge::new(0, 1, "x")]).is_ok());
    }
}
