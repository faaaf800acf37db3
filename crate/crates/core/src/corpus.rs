//! Annotated sentences and the corpus that holds them.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-open token range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn single(index: usize) -> Self {
        Span {
            start: index,
            end: index + 1,
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// One word of an annotated sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub word: String,
    pub lemma: String,
    pub tag: String,
    /// Entity type, `None` outside named entities.
    pub entity: Option<String>,
    pub entity_span: Option<Span>,
    /// Enclosing NP chunk.
    pub chunk_span: Option<Span>,
    /// Whether a space follows this token in the surface text.
    pub space_after: bool,
}

impl Token {
    /// A token with no entity or chunk annotation.
    pub fn new(
        index: usize,
        word: impl Into<String>,
        lemma: impl Into<String>,
        tag: impl Into<String>,
    ) -> Self {
        Token {
            index,
            word: word.into(),
            lemma: lemma.into(),
            tag: tag.into(),
            entity: None,
            entity_span: None,
            chunk_span: None,
            space_after: true,
        }
    }
}

/// A labeled dependency edge `head --label--> dependent`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DepEdge {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

impl DepEdge {
    pub fn new(head: usize, dependent: usize, label: impl Into<String>) -> Self {
        DepEdge {
            head,
            dependent,
            label: label.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("sentence has no tokens")]
    Empty,
    #[error("token {0} has index {1}")]
    TokenIndex(usize, usize),
    #[error("token {0}: word is empty or contains whitespace")]
    BadWord(usize),
    #[error("token {index}: {what} span {span} does not contain the token")]
    BadSpan {
        index: usize,
        what: &'static str,
        span: Span,
    },
    #[error("token {0}: entity type and entity span must both be present or both absent")]
    EntityMismatch(usize),
    #[error("edge {head}->{dependent} ({label}) is out of range or a self loop")]
    BadEdge {
        head: usize,
        dependent: usize,
        label: String,
    },
    #[error("edge {head}->{dependent} has an empty label")]
    EmptyLabel { head: usize, dependent: usize },
    #[error("duplicate edge {head}->{dependent} ({label})")]
    DuplicateEdge {
        head: usize,
        dependent: usize,
        label: String,
    },
    #[error("dependency graph is not connected ({components} components)")]
    Disconnected { components: usize },
}

/// A parsed sentence: tokens plus labeled directed dependency edges.
///
/// Edges are kept sorted by `(dependent, head, label)`, which is also the
/// order used for rendering and for edge lookups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceGraph {
    id: String,
    tokens: Vec<Token>,
    edges: Vec<DepEdge>,
}

impl SentenceGraph {
    /// Validates and builds a sentence graph. Duplicate edges are rejected.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<Token>,
        mut edges: Vec<DepEdge>,
    ) -> Result<Self, GraphError> {
        let n = tokens.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i {
                return Err(GraphError::TokenIndex(i, t.index));
            }
            if t.word.is_empty() || t.word.chars().any(char::is_whitespace) {
                return Err(GraphError::BadWord(i));
            }
            if t.entity.is_some() != t.entity_span.is_some() {
                return Err(GraphError::EntityMismatch(i));
            }
            for (what, span) in [("entity", t.entity_span), ("chunk", t.chunk_span)] {
                if let Some(span) = span {
                    if !span.contains(i) || span.end > n {
                        return Err(GraphError::BadSpan {
                            index: i,
                            what,
                            span,
                        });
                    }
                }
            }
        }
        for e in &edges {
            if e.head >= n || e.dependent >= n || e.head == e.dependent {
                return Err(GraphError::BadEdge {
                    head: e.head,
                    dependent: e.dependent,
                    label: e.label.clone(),
                });
            }
            if e.label.is_empty() {
                return Err(GraphError::EmptyLabel {
                    head: e.head,
                    dependent: e.dependent,
                });
            }
        }
        edges.sort_by(edge_order);
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge {
                head: w[0].head,
                dependent: w[0].dependent,
                label: w[0].label.clone(),
            });
        }
        let components = count_components(n, &edges);
        if components != 1 {
            return Err(GraphError::Disconnected { components });
        }
        Ok(SentenceGraph {
            id: id.into(),
            tokens,
            edges,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn has_edge(&self, head: usize, dependent: usize, label: &str) -> bool {
        self.edges
            .binary_search_by(|e| {
                (e.dependent, e.head, e.label.as_str()).cmp(&(dependent, head, label))
            })
            .is_ok()
    }

    pub fn outgoing(&self, head: usize) -> impl Iterator<Item = &DepEdge> {
        self.edges.iter().filter(move |e| e.head == head)
    }

    pub fn incoming(&self, dependent: usize) -> impl Iterator<Item = &DepEdge> {
        let start = self.edges.partition_point(|e| e.dependent < dependent);
        self.edges[start..]
            .iter()
            .take_while(move |e| e.dependent == dependent)
    }

    /// Undirected adjacency lists, neighbours sorted and deduplicated.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.tokens.len()];
        for e in &self.edges {
            adj[e.head].push(e.dependent);
            adj[e.dependent].push(e.head);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Surface text, honouring each token's `space_after`.
    pub fn text(&self) -> String {
        sentence_text(self)
    }

    /// Surface text of a token range, spaced like the full sentence.
    pub fn span_text(&self, span: Span) -> String {
        join_words(&self.tokens[span.start..span.end])
    }
}

fn edge_order(a: &DepEdge, b: &DepEdge) -> std::cmp::Ordering {
    (a.dependent, a.head, &a.label).cmp(&(b.dependent, b.head, &b.label))
}

fn count_components(n: usize, edges: &[DepEdge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for e in edges {
        let a = find(&mut parent, e.head);
        let b = find(&mut parent, e.dependent);
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

/// Words joined with the input's spacing convention.
pub fn sentence_text(s: &SentenceGraph) -> String {
    join_words(s.tokens())
}

fn join_words(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        out.push_str(&t.word);
        if t.space_after && i + 1 < tokens.len() {
            out.push(' ');
        }
    }
    out
}

/// A sentence dropped during ingestion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSentence {
    pub sentence_id: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub sources: Vec<String>,
    /// Seconds since the Unix epoch.
    pub ingested_at: u64,
    pub skipped: Vec<SkippedSentence>,
}

#[derive(Debug, Error)]
#[error("duplicate sentence id {0:?}")]
pub struct DuplicateSentenceId(pub String);

/// An ordered collection of sentences with unique ids.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    sentences: Vec<SentenceGraph>,
    ids: HashSet<String>,
    pub meta: CorpusMeta,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sentence: SentenceGraph) -> Result<(), DuplicateSentenceId> {
        if !self.ids.insert(sentence.id().to_owned()) {
            return Err(DuplicateSentenceId(sentence.id().to_owned()));
        }
        self.sentences.push(sentence);
        Ok(())
    }

    pub fn from_sentences(
        sentences: impl IntoIterator<Item = SentenceGraph>,
    ) -> Result<Self, DuplicateSentenceId> {
        let mut corpus = Corpus::new();
        for s in sentences {
            corpus.push(s)?;
        }
        Ok(corpus)
    }

    pub fn sentences(&self) -> &[SentenceGraph] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(SentenceGraph::len).sum()
    }
}
