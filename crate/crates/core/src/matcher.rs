//! Exact verification of a query graph against a sentence.
//!
//! A match maps every query node to a distinct token so that each node's
//! constraint holds and every query edge `u -label-> v` exists between the
//! mapped tokens. Matches differing only in unnamed nodes are collapsed.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::builder::QueryGraph;
use crate::constraint::satisfies;
use crate::corpus::{SentenceGraph, Span};
use crate::index::{plan, IndexArtifact};

pub const DEFAULT_MAX_MATCHES_PER_SENTENCE: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CaptureBinding {
    pub name: String,
    pub token: usize,
    pub span: Span,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    pub sentence_id: String,
    pub text: String,
    /// In query node order.
    pub captures: Vec<CaptureBinding>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceMatches {
    pub results: Vec<MatchResult>,
    /// The per-sentence cap was reached and further matches were dropped.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchOptions {
    pub max_matches_per_sentence: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            max_matches_per_sentence: DEFAULT_MAX_MATCHES_PER_SENTENCE,
        }
    }
}

/// The entity span of `token`, else its NP chunk span, else the token.
pub fn expand_span(sentence: &SentenceGraph, token: usize) -> Span {
    let t = sentence.token(token);
    t.entity_span
        .or(t.chunk_span)
        .unwrap_or(Span::single(token))
}

pub fn match_sentence(graph: &QueryGraph, sentence: &SentenceGraph) -> Vec<MatchResult> {
    match_sentence_with(graph, sentence, MatchOptions::default()).results
}

struct Search<'a> {
    sentence: &'a SentenceGraph,
    order: Vec<usize>,
    /// For each node, the query edges touching it as (other, label, outgoing).
    incident: Vec<Vec<(usize, &'a str, bool)>>,
    named: Vec<usize>,
    assignment: Vec<Option<usize>>,
    used: Vec<bool>,
    found: BTreeSet<Vec<usize>>,
    cap: usize,
    truncated: bool,
}

pub fn match_sentence_with(
    graph: &QueryGraph,
    sentence: &SentenceGraph,
    options: MatchOptions,
) -> SentenceMatches {
    let none = SentenceMatches {
        results: Vec::new(),
        truncated: false,
    };
    let n = graph.nodes().len();
    if n > sentence.len() || options.max_matches_per_sentence == 0 {
        return none;
    }
    let mut incident: Vec<Vec<(usize, &str, bool)>> = vec![Vec::new(); n];
    for e in graph.edges() {
        incident[e.from].push((e.to, e.label.as_str(), true));
        incident[e.to].push((e.from, e.label.as_str(), false));
    }

    let mut domains: Vec<Vec<usize>> = Vec::with_capacity(n);
    for node in graph.nodes() {
        let d: Vec<usize> = (0..sentence.len())
            .filter(|&t| satisfies(sentence.token(t), &node.constraint))
            .filter(|&t| {
                incident[node.id].iter().all(|&(_, label, out)| {
                    if out {
                        sentence.outgoing(t).any(|e| e.label == label)
                    } else {
                        sentence.incoming(t).any(|e| e.label == label)
                    }
                })
            })
            .collect();
        if d.is_empty() {
            return none;
        }
        domains.push(d);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (domains[v].len(), v));
    let named = graph
        .nodes()
        .iter()
        .filter(|n| n.name.is_some())
        .map(|n| n.id)
        .collect();

    let mut search = Search {
        sentence,
        order,
        incident,
        named,
        assignment: vec![None; n],
        used: vec![false; sentence.len()],
        found: BTreeSet::new(),
        cap: options.max_matches_per_sentence,
        truncated: false,
    };
    search.extend(0, &mut domains);

    let text = sentence.text();
    let results = search
        .found
        .iter()
        .map(|tokens| MatchResult {
            sentence_id: sentence.id().to_owned(),
            text: text.clone(),
            captures: search
                .named
                .iter()
                .zip(tokens)
                .map(|(&node, &token)| {
                    let q = graph.node(node);
                    let span = if q.expand {
                        expand_span(sentence, token)
                    } else {
                        Span::single(token)
                    };
                    CaptureBinding {
                        name: q.name.clone().unwrap_or_default(),
                        token,
                        span,
                        text: sentence.span_text(span),
                    }
                })
                .collect(),
        })
        .collect();
    SentenceMatches {
        results,
        truncated: search.truncated,
    }
}

impl Search<'_> {
    /// Returns false once the cap is hit.
    fn extend(&mut self, depth: usize, domains: &mut [Vec<usize>]) -> bool {
        if depth == self.order.len() {
            let key: Vec<usize> = self
                .named
                .iter()
                .map(|&v| self.assignment[v].expect("complete assignment"))
                .collect();
            if self.found.insert(key) && self.found.len() > self.cap {
                self.found.pop_last();
                self.truncated = true;
                return false;
            }
            return true;
        }
        let v = self.order[depth];
        let candidates = domains[v].clone();
        for t in candidates {
            if self.used[t] {
                continue;
            }
            // prune the domains of unassigned neighbours
            let mut saved = Vec::new();
            let mut dead = false;
            for &(w, label, out) in &self.incident[v] {
                if self.assignment[w].is_some() {
                    continue;
                }
                let keep: Vec<usize> = domains[w]
                    .iter()
                    .copied()
                    .filter(|&u| {
                        if out {
                            self.sentence.has_edge(t, u, label)
                        } else {
                            self.sentence.has_edge(u, t, label)
                        }
                    })
                    .collect();
                dead = keep.is_empty();
                saved.push((w, std::mem::replace(&mut domains[w], keep)));
                if dead {
                    break;
                }
            }
            if !dead {
                self.assignment[v] = Some(t);
                self.used[t] = true;
                let go_on = self.extend(depth + 1, domains);
                self.assignment[v] = None;
                self.used[t] = false;
                if !go_on {
                    restore(domains, saved);
                    return false;
                }
            }
            restore(domains, saved);
        }
        true
    }
}

fn restore(domains: &mut [Vec<usize>], saved: Vec<(usize, Vec<usize>)>) {
    for (w, d) in saved.into_iter().rev() {
        domains[w] = d;
    }
}

/// Sentences verified per parallel batch.
const BATCH: usize = 256;

/// Lazily evaluates a query over an index, in corpus order.
pub struct QueryStream<'a> {
    index: &'a IndexArtifact,
    graph: &'a QueryGraph,
    options: MatchOptions,
    candidates: Vec<u32>,
    next_candidate: usize,
    buffer: std::collections::VecDeque<(u32, MatchResult)>,
    truncated_sentences: usize,
    sentences_verified: usize,
}

pub fn run_query<'a>(index: &'a IndexArtifact, graph: &'a QueryGraph) -> QueryStream<'a> {
    run_query_with(index, graph, MatchOptions::default())
}

pub fn run_query_with<'a>(
    index: &'a IndexArtifact,
    graph: &'a QueryGraph,
    options: MatchOptions,
) -> QueryStream<'a> {
    QueryStream {
        index,
        graph,
        options,
        candidates: index.candidates(&plan(graph)),
        next_candidate: 0,
        buffer: Default::default(),
        truncated_sentences: 0,
        sentences_verified: 0,
    }
}

impl QueryStream<'_> {
    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    /// Sentences whose matches were cut off at the per-sentence cap so far.
    pub fn truncated_sentences(&self) -> usize {
        self.truncated_sentences
    }

    pub fn sentences_verified(&self) -> usize {
        self.sentences_verified
    }

    /// The next result with the ordinal of its sentence in the index.
    pub fn next_located(&mut self) -> Option<(u32, MatchResult)> {
        self.fill();
        self.buffer.pop_front()
    }

    fn fill(&mut self) {
        while self.buffer.is_empty() && self.next_candidate < self.candidates.len() {
            // small first batch so the first page comes back quickly
            let size = if self.sentences_verified == 0 { 32 } else { BATCH };
            let end = (self.next_candidate + size).min(self.candidates.len());
            let batch = &self.candidates[self.next_candidate..end];
            let (index, graph, options) = (self.index, self.graph, self.options);
            let verified: Vec<SentenceMatches> = batch
                .par_iter()
                .map(|&ord| match index.sentence(ord) {
                    Ok(s) => match_sentence_with(graph, &s, options),
                    Err(e) => {
                        log::error!("skipping unreadable sentence: {e}");
                        SentenceMatches {
                            results: Vec::new(),
                            truncated: false,
                        }
                    }
                })
                .collect();
            self.sentences_verified += batch.len();
            self.next_candidate = end;
            for (&ord, m) in batch.iter().zip(verified) {
                self.truncated_sentences += usize::from(m.truncated);
                self.buffer.extend(m.results.into_iter().map(|r| (ord, r)));
            }
        }
    }
}

impl Iterator for QueryStream<'_> {
    type Item = MatchResult;

    fn next(&mut self) -> Option<MatchResult> {
        self.next_located().map(|(_, r)| r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{QueryEdge, QueryNode};
    use crate::constraint::{Property, TokenConstraint, ValueMatcher};
    use crate::corpus::{DepEdge, Token};

    fn star(n: usize) -> SentenceGraph {
        let tokens = (0..n).map(|i| Token::new(i, format!("w{i}"), "w", "X")).collect();
        let edges = (1..n).map(|i| DepEdge::new(0, i, "dep")).collect();
        SentenceGraph::new("star", tokens, edges).unwrap()
    }

    fn node(id: usize, name: Option<&str>) -> QueryNode {
        let mut q = QueryNode::connector(id);
        q.name = name.map(str::to_owned);
        q
    }

    #[test]
    fn injective() {
        // hub with two distinct dep children
        let g = QueryGraph::new(
            vec![node(0, Some("h")), node(1, Some("a")), node(2, Some("b"))],
            vec![QueryEdge::new(0, 1, "dep"), QueryEdge::new(0, 2, "dep")],
        )
        .unwrap();
        let r = match_sentence(&g, &star(3));
        // a,b in {1,2} distinct: (1,2) and (2,1)
        assert_eq!(r.len(), 2);
        for m in &r {
            assert_ne!(m.captures[1].token, m.captures[2].token);
        }
        assert!(match_sentence(&g, &star(2)).is_empty());
    }

    #[test]
    fn unnamed_nodes_collapse() {
        let g = QueryGraph::new(
            vec![node(0, Some("h")), node(1, None)],
            vec![QueryEdge::new(0, 1, "dep")],
        )
        .unwrap();
        let r = match_sentence(&g, &star(5));
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].captures.len(), 1);
        assert_eq!(r[0].captures[0].token, 0);
    }

    #[test]
    fn cap_truncates() {
        let g = QueryGraph::new(
            vec![node(0, Some("h")), node(1, Some("a")), node(2, Some("b"))],
            vec![QueryEdge::new(0, 1, "dep"), QueryEdge::new(0, 2, "dep")],
        )
        .unwrap();
        let s = star(40); // 39 * 38 matches
        let all = match_sentence_with(&g, &s, MatchOptions { max_matches_per_sentence: 5000 });
        assert_eq!(all.results.len(), 39 * 38);
        assert!(!all.truncated);
        let capped = match_sentence(&g, &s);
        assert_eq!(capped.len(), 1000);
        let m = match_sentence_with(&g, &s, MatchOptions::default());
        assert!(m.truncated);
        let exact = match_sentence_with(&g, &s, MatchOptions { max_matches_per_sentence: 39 * 38 });
        assert_eq!(exact.results.len(), 39 * 38);
        assert!(!exact.truncated);
    }

    #[test]
    fn expansion() {
        let mut tokens = vec![
            Token::new(0, "Paul", "Paul", "NNP"),
            Token::new(1, "Allen", "Allen", "NNP"),
            Token::new(2, "met", "meet", "VBD"),
            Token::new(3, "the", "the", "DT"),
            Token::new(4, "founder", "founder", "NN"),
        ];
        for t in &mut tokens[0..2] {
            t.entity = Some("PERSON".into());
            t.entity_span = Some(Span::new(0, 2));
            t.chunk_span = Some(Span::new(0, 2));
        }
        for t in &mut tokens[3..5] {
            t.chunk_span = Some(Span::new(3, 5));
        }
        let s = SentenceGraph::new(
            "s",
            tokens,
            vec![
                DepEdge::new(1, 0, "compound"),
                DepEdge::new(2, 1, "nsubj"),
                DepEdge::new(2, 4, "dobj"),
                DepEdge::new(4, 3, "det"),
            ],
        )
        .unwrap();
        assert_eq!(expand_span(&s, 1), Span::new(0, 2));
        assert_eq!(expand_span(&s, 4), Span::new(3, 5));
        assert_eq!(expand_span(&s, 2), Span::single(2));

        let mut who = node(0, Some("who"));
        who.expand = true;
        let mut what = node(2, Some("what"));
        what.expand = true;
        let verb = QueryNode {
            constraint: TokenConstraint::any().with(Property::Lemma, ValueMatcher::literals(["meet"])),
            ..node(1, None)
        };
        let g = QueryGraph::new(
            vec![who, verb, what],
            vec![QueryEdge::new(1, 0, "nsubj"), QueryEdge::new(1, 2, "dobj")],
        )
        .unwrap();
        let r = match_sentence(&g, &s);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].captures[0].text, "Paul Allen");
        assert_eq!(r[0].captures[1].text, "the founder");
        assert_eq!(r[0].text, "Paul Allen met the founder");
    }

    #[test]
    fn stream_preserves_corpus_order() {
        let sentences: Vec<_> = (0..1000)
            .map(|i| {
                let tokens = vec![Token::new(0, "a", "a", "X"), Token::new(1, "b", "b", "X")];
                SentenceGraph::new(format!("s{i:04}"), tokens, vec![DepEdge::new(0, 1, "dep")]).unwrap()
            })
            .collect();
        let idx = IndexArtifact::build(&sentences).unwrap();
        let g = QueryGraph::new(
            vec![node(0, Some("x")), node(1, Some("y"))],
            vec![QueryEdge::new(0, 1, "dep")],
        )
        .unwrap();
        let ids: Vec<String> = run_query(&idx, &g).map(|m| m.sentence_id).collect();
        let expected: Vec<String> = (0..1000).map(|i| format!("s{i:04}")).collect();
        assert_eq!(ids, expected);
        let mut stream = run_query(&idx, &g);
        assert_eq!(stream.next().unwrap().sentence_id, "s0000");
        assert!(stream.sentences_verified() < 1000);
    }
}
