//! Query text in, results out: the pieces wired together for the CLI and
//! the service.

use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::builder::{build_query_graph, BuildError, QueryGraph};
use crate::index::IndexArtifact;
use crate::matcher::{run_query_with, MatchOptions, MatchResult, QueryStream};
use crate::provider::{parse_aligned, ParseProvider, ParseRequest, ProviderError};
use crate::query::{parse_query, QueryError};

pub const DEFAULT_COUNT_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum QueryFailure {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl QueryFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            QueryFailure::Query(e) => e.kind(),
            QueryFailure::Build(BuildError::Constraint { source, .. }) => source.kind(),
            QueryFailure::Build(BuildError::Alignment { .. }) => "AlignmentError",
            QueryFailure::Build(BuildError::Steiner(_)) => "InternalError",
            QueryFailure::Provider(ProviderError::Unavailable(_))
            | QueryFailure::Provider(ProviderError::BadResponse(_)) => "ProviderUnavailable",
            QueryFailure::Provider(ProviderError::Alignment { .. })
            | QueryFailure::Provider(ProviderError::UnknownSentence(_)) => "AlignmentError",
            QueryFailure::Provider(ProviderError::BadRequest(_)) => "SyntaxError",
        }
    }

    /// Character offset in the query string, for errors tied to one spot.
    pub fn position(&self) -> Option<usize> {
        match self {
            QueryFailure::Query(e) => Some(e.position()),
            QueryFailure::Build(BuildError::Constraint { position, .. }) => Some(*position),
            _ => None,
        }
    }

    /// The user can fix this by editing the query text.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            QueryFailure::Query(_)
                | QueryFailure::Build(BuildError::Constraint { .. })
                | QueryFailure::Provider(ProviderError::BadRequest(_))
        )
    }
}

/// Parses the markup, parses the example sentence and builds the graph.
pub fn compile_query(query: &str, provider: &dyn ParseProvider) -> Result<QueryGraph, QueryFailure> {
    let seq = parse_query(query)?;
    let request = ParseRequest::new(seq.words())?;
    let parse = parse_aligned(provider, &request)?;
    Ok(build_query_graph(&seq, &parse)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Total {
    Exact(usize),
    /// More results than the count cap.
    More,
}

impl Serialize for Total {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Total::Exact(n) => s.serialize_u64(*n as u64),
            Total::More => s.serialize_str("more"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Page {
    pub results: Vec<MatchResult>,
    pub total: Total,
    pub truncated_sentences: usize,
}

#[derive(Clone)]
pub struct Engine {
    index: Arc<IndexArtifact>,
    provider: Arc<dyn ParseProvider>,
    options: MatchOptions,
    count_cap: usize,
}

impl Engine {
    pub fn new(index: Arc<IndexArtifact>, provider: Arc<dyn ParseProvider>) -> Self {
        Engine {
            index,
            provider,
            options: MatchOptions::default(),
            count_cap: DEFAULT_COUNT_CAP,
        }
    }

    pub fn with_options(mut self, options: MatchOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_count_cap(mut self, cap: usize) -> Self {
        self.count_cap = cap;
        self
    }

    pub fn index(&self) -> &IndexArtifact {
        &self.index
    }

    pub fn compile(&self, query: &str) -> Result<QueryGraph, QueryFailure> {
        compile_query(query, self.provider.as_ref())
    }

    pub fn stream<'a>(&'a self, graph: &'a QueryGraph) -> QueryStream<'a> {
        run_query_with(&self.index, graph, self.options)
    }

    /// Page `page` (zero-based) of the corpus-ordered results, with a
    /// total counted up to the count cap.
    pub fn page(&self, graph: &QueryGraph, page: usize, page_size: usize) -> Page {
        let mut stream = self.stream(graph);
        let skip = page.saturating_mul(page_size);
        let mut seen = 0usize;
        let mut results = Vec::new();
        for r in stream.by_ref() {
            if seen >= skip && results.len() < page_size {
                results.push(r);
            }
            seen += 1;
            if seen > self.count_cap && seen >= skip.saturating_add(page_size) {
                break;
            }
        }
        Page {
            results,
            total: if seen > self.count_cap {
                Total::More
            } else {
                Total::Exact(seen)
            },
            truncated_sentences: stream.truncated_sentences(),
        }
    }
}
