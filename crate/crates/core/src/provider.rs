//! Dependency parses for query sentences.
//!
//! Requests are pre-tokenized so query words and parse tokens line up by
//! position. Two backends exist: a fixture directory of CoNLL-U files
//! keyed by the space-joined sentence, and an HTTP service that accepts
//! one word per line and answers with one CoNLL-U sentence.

use std::collections::HashMap;
use std::io::{BufReader, Read};
use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use crate::conllu::{Block, ConlluError, ConlluReader, IngestOptions};
use crate::corpus::SentenceGraph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseRequest {
    words: Vec<String>,
}

impl ParseRequest {
    pub fn new<I, S>(words: I) -> Result<Self, ProviderError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(ProviderError::BadRequest("no words to parse".into()));
        }
        if let Some(w) = words
            .iter()
            .find(|w| w.is_empty() || w.chars().any(char::is_whitespace))
        {
            return Err(ProviderError::BadRequest(format!(
                "word {w:?} is empty or contains whitespace"
            )));
        }
        Ok(ParseRequest { words })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// The fixture lookup key.
    pub fn sentence(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("parse provider unavailable: {0}")]
    Unavailable(String),
    #[error("query could not be parsed: parser returned {got} tokens for {expected} words")]
    Alignment { expected: usize, got: usize },
    #[error("query could not be parsed: no parse for {0:?}")]
    UnknownSentence(String),
    #[error("parse provider returned an unusable parse: {0}")]
    BadResponse(String),
    #[error("bad parse request: {0}")]
    BadRequest(String),
}

pub trait ParseProvider: Send + Sync {
    /// Backends return whatever they produced; use [`parse_aligned`] to
    /// enforce the one-token-per-word contract.
    fn parse(&self, req: &ParseRequest) -> Result<SentenceGraph, ProviderError>;
}

/// Parses and checks that the parse has exactly one token per word.
pub fn parse_aligned(
    provider: &dyn ParseProvider,
    req: &ParseRequest,
) -> Result<SentenceGraph, ProviderError> {
    let graph = provider.parse(req)?;
    if graph.len() != req.words().len() {
        return Err(ProviderError::Alignment {
            expected: req.words().len(),
            got: graph.len(),
        });
    }
    Ok(graph)
}

/// Parses looked up by exact sentence string.
#[derive(Clone, Debug, Default)]
pub struct FixtureProvider {
    parses: HashMap<String, SentenceGraph>,
}

impl FixtureProvider {
    pub fn from_graphs(graphs: impl IntoIterator<Item = SentenceGraph>) -> Self {
        let parses = graphs
            .into_iter()
            .map(|g| (key_of(&g), g))
            .collect();
        FixtureProvider { parses }
    }

    /// Loads every `*.conllu` file in `dir`, in file-name order. A later
    /// parse of the same sentence replaces an earlier one.
    pub fn from_dir(dir: &Path, options: &IngestOptions) -> Result<Self, FixtureError> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| FixtureError::Io(dir.display().to_string(), e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
            .collect();
        files.sort();
        let mut parses = HashMap::new();
        for path in files {
            let name = path.display().to_string();
            let file =
                std::fs::File::open(&path).map_err(|e| FixtureError::Io(name.clone(), e))?;
            let options = IngestOptions {
                require_sent_id: false,
                ..options.clone()
            };
            for block in ConlluReader::new(BufReader::new(file), options) {
                match block.map_err(|e| FixtureError::Parse(name.clone(), e))? {
                    Block::Sentence(g) => {
                        parses.insert(key_of(&g), g);
                    }
                    Block::Skipped(s) => log::warn!("{name}: skipped fixture parse: {}", s.reason),
                }
            }
        }
        Ok(FixtureProvider { parses })
    }

    pub fn len(&self) -> usize {
        self.parses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parses.is_empty()
    }
}

fn key_of(g: &SentenceGraph) -> String {
    g.tokens()
        .iter()
        .map(|t| t.word.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, ConlluError),
}

impl ParseProvider for FixtureProvider {
    fn parse(&self, req: &ParseRequest) -> Result<SentenceGraph, ProviderError> {
        let key = req.sentence();
        self.parses
            .get(&key)
            .cloned()
            .ok_or(ProviderError::UnknownSentence(key))
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// Remote parser: POST one word per line, read back one CoNLL-U sentence.
/// No retries.
pub struct HttpProvider {
    url: String,
    agent: ureq::Agent,
    options: IngestOptions,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpProvider {
            url: url.into(),
            agent,
            options: IngestOptions {
                require_sent_id: false,
                ..IngestOptions::default()
            },
        }
    }

    pub fn with_options(mut self, options: IngestOptions) -> Self {
        self.options = IngestOptions {
            require_sent_id: false,
            ..options
        };
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ParseProvider for HttpProvider {
    fn parse(&self, req: &ParseRequest) -> Result<SentenceGraph, ProviderError> {
        let mut body = req.words().join("\n");
        body.push('\n');
        let mut response = self
            .agent
            .post(&self.url)
            .content_type("text/plain; charset=utf-8")
            .send(body.as_bytes())
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let mut text = String::new();
        response
            .body_mut()
            .as_reader()
            .read_to_string(&mut text)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        parse_single_sentence(&text, &self.options)
    }
}

fn parse_single_sentence(text: &str, options: &IngestOptions) -> Result<SentenceGraph, ProviderError> {
    let mut reader = ConlluReader::new(text.as_bytes(), options.clone());
    let first = reader
        .read_block()
        .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
    let graph = match first {
        Some(Block::Sentence(g)) => g,
        Some(Block::Skipped(s)) => return Err(ProviderError::BadResponse(s.reason)),
        None => return Err(ProviderError::BadResponse("empty response".into())),
    };
    match reader.read_block() {
        Ok(None) => Ok(graph),
        Ok(Some(_)) => Err(ProviderError::BadResponse(
            "response holds more than one sentence".into(),
        )),
        Err(e) => Err(ProviderError::BadResponse(e.to_string())),
    }
}
