//! Reader and writer for the annotated CoNLL-U dialect.
//!
//! Standard 10-column CoNLL-U. The `tag` property is read from XPOS by
//! default (UPOS on request). The MISC column may carry:
//!
//! * `Entity=B-<TYPE>` / `Entity=I-<TYPE>` / `Entity=O` for named entities,
//! * `Chunk=B-NP` / `Chunk=I-NP` / `Chunk=O` for noun-phrase chunks,
//! * `SpaceAfter=No`.
//!
//! Every sentence block needs a `# sent_id = <id>` comment. Edges from the
//! DEPS column are merged with the HEAD/DEPREL tree. Multiword-token ranges
//! and empty nodes are ignored.

use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::corpus::{Corpus, DepEdge, SentenceGraph, SkippedSentence, Span, Token};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TagColumn {
    Upos,
    #[default]
    Xpos,
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub tag_column: TagColumn,
    /// When false, blocks without `sent_id` get a generated id.
    pub require_sent_id: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            tag_column: TagColumn::Xpos,
            require_sent_id: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: sentence has no `# sent_id` comment")]
    MissingSentId { line: usize },
    #[error("line {line}: duplicate sentence id {id:?}")]
    DuplicateSentenceId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ConlluError {
    fn malformed(line: usize, message: impl Into<String>) -> Self {
        ConlluError::Malformed {
            line,
            message: message.into(),
        }
    }
}

/// What the reader produced for one sentence block.
#[derive(Debug)]
pub enum Block {
    Sentence(SentenceGraph),
    Skipped(SkippedSentence),
}

/// Streaming reader over sentence blocks.
pub struct ConlluReader<R> {
    input: R,
    options: IngestOptions,
    line_no: usize,
    generated: usize,
    done: bool,
}

struct RawToken {
    word: String,
    lemma: String,
    tag: String,
    head: Option<usize>,
    deprel: String,
    deps: Vec<(usize, String)>,
    entity: Option<Bio>,
    chunk: Option<Bio>,
    space_after: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Bio {
    Begin(String),
    Inside(String),
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(input: R, options: IngestOptions) -> Self {
        ConlluReader {
            input,
            options,
            line_no: 0,
            generated: 0,
            done: false,
        }
    }

    /// Reads the next block, `Ok(None)` at end of input.
    pub fn read_block(&mut self) -> Result<Option<Block>, ConlluError> {
        let mut line = String::new();
        let mut sent_id: Option<String> = None;
        let mut raw: Vec<RawToken> = Vec::new();
        let mut start_line = 0;
        let mut seen_any = false;

        loop {
            line.clear();
            let eof = self.done || self.input.read_line(&mut line)? == 0;
            if eof {
                self.done = true;
            } else {
                self.line_no += 1;
            }
            let trimmed = line.trim_end_matches(['\n', '\r']);
            if eof || trimmed.trim().is_empty() {
                if !seen_any {
                    if eof {
                        return Ok(None);
                    }
                    continue;
                }
                return self.finish_block(sent_id, raw, start_line).map(Some);
            }
            if !seen_any {
                seen_any = true;
                start_line = self.line_no;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    if key.trim() == "sent_id" {
                        sent_id = Some(value.trim().to_owned());
                    }
                }
                continue;
            }
            if let Some(tok) = self.parse_token_line(trimmed, raw.len())? {
                raw.push(tok);
            }
        }
    }

    fn parse_token_line(
        &self,
        line: &str,
        position: usize,
    ) -> Result<Option<RawToken>, ConlluError> {
        let ln = self.line_no;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::malformed(
                ln,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            return Ok(None);
        }
        let id: usize = id
            .parse()
            .map_err(|_| ConlluError::malformed(ln, format!("bad token id {id:?}")))?;
        if id != position + 1 {
            return Err(ConlluError::malformed(
                ln,
                format!("token id {id} out of sequence, expected {}", position + 1),
            ));
        }
        let word = cols[1];
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(ConlluError::malformed(ln, "empty or whitespace-bearing FORM"));
        }
        let (primary, secondary) = match self.options.tag_column {
            TagColumn::Upos => (cols[3], cols[4]),
            TagColumn::Xpos => (cols[4], cols[3]),
        };
        let tag = if primary == "_" && secondary != "_" {
            secondary
        } else {
            primary
        };
        let head = match cols[6] {
            "_" => None,
            h => {
                let h: usize = h
                    .parse()
                    .map_err(|_| ConlluError::malformed(ln, format!("bad HEAD {h:?}")))?;
                if h == 0 {
                    None
                } else {
                    Some(h - 1)
                }
            }
        };
        let mut deps = Vec::new();
        if cols[8] != "_" {
            for item in cols[8].split('|') {
                let (h, label) = item
                    .split_once(':')
                    .ok_or_else(|| ConlluError::malformed(ln, format!("bad DEPS item {item:?}")))?;
                if h.contains('.') {
                    continue;
                }
                let h: usize = h
                    .parse()
                    .map_err(|_| ConlluError::malformed(ln, format!("bad DEPS head {h:?}")))?;
                if h == 0 {
                    continue;
                }
                if label.is_empty() {
                    return Err(ConlluError::malformed(ln, "empty DEPS label"));
                }
                deps.push((h - 1, label.to_owned()));
            }
        }
        let mut entity = None;
        let mut chunk = None;
        let mut space_after = true;
        if cols[9] != "_" {
            for item in cols[9].split('|') {
                match item.split_once('=') {
                    Some(("Entity", v)) => entity = parse_bio(v, ln)?,
                    Some(("Chunk", v)) => chunk = parse_bio(v, ln)?,
                    Some(("SpaceAfter", "No")) => space_after = false,
                    _ => {}
                }
            }
        }
        Ok(Some(RawToken {
            word: word.to_owned(),
            lemma: cols[2].to_owned(),
            tag: tag.to_owned(),
            head,
            deprel: cols[7].to_owned(),
            deps,
            entity,
            chunk,
            space_after,
        }))
    }

    fn finish_block(
        &mut self,
        sent_id: Option<String>,
        raw: Vec<RawToken>,
        start_line: usize,
    ) -> Result<Block, ConlluError> {
        let id = match sent_id {
            Some(id) if !id.is_empty() => id,
            _ if self.options.require_sent_id => {
                return Err(ConlluError::MissingSentId { line: start_line })
            }
            _ => {
                self.generated += 1;
                format!("s{}", self.generated)
            }
        };
        if raw.is_empty() {
            return Err(ConlluError::malformed(start_line, "sentence block has no tokens"));
        }
        let n = raw.len();
        let mut edges = Vec::new();
        for (i, t) in raw.iter().enumerate() {
            if let Some(h) = t.head {
                if h >= n {
                    return Err(ConlluError::malformed(
                        start_line,
                        format!("token {} has HEAD {} beyond sentence end", i + 1, h + 1),
                    ));
                }
                if t.deprel == "_" || t.deprel.is_empty() {
                    return Err(ConlluError::malformed(
                        start_line,
                        format!("token {} has a HEAD but no DEPREL", i + 1),
                    ));
                }
                edges.push(DepEdge::new(h, i, t.deprel.clone()));
            }
            for (h, label) in &t.deps {
                if *h >= n {
                    return Err(ConlluError::malformed(
                        start_line,
                        format!("token {} has DEPS head {} beyond sentence end", i + 1, h + 1),
                    ));
                }
                edges.push(DepEdge::new(*h, i, label.clone()));
            }
        }
        edges.sort();
        edges.dedup();
        if let Some(e) = edges.iter().find(|e| e.head == e.dependent) {
            return Err(ConlluError::malformed(
                start_line,
                format!("token {} is its own head", e.head + 1),
            ));
        }

        let entities = resolve_bio(raw.iter().map(|t| t.entity.as_ref()));
        let chunks = resolve_bio(raw.iter().map(|t| t.chunk.as_ref()));
        let tokens = raw
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let (entity, entity_span) = match &entities[i] {
                    Some((ty, span)) => (Some(ty.clone()), Some(*span)),
                    None => (None, None),
                };
                let chunk_span = match &chunks[i] {
                    Some((ty, span)) if ty == "NP" => Some(*span),
                    _ => None,
                };
                Token {
                    index: i,
                    word: t.word,
                    lemma: t.lemma,
                    tag: t.tag,
                    entity,
                    entity_span,
                    chunk_span,
                    space_after: t.space_after,
                }
            })
            .collect();

        match SentenceGraph::new(id.clone(), tokens, edges) {
            Ok(s) => Ok(Block::Sentence(s)),
            Err(e @ crate::corpus::GraphError::Disconnected { .. }) => {
                log::warn!("line {start_line}: skipping sentence {id:?}: {e}");
                Ok(Block::Skipped(SkippedSentence {
                    sentence_id: id,
                    line: start_line,
                    reason: e.to_string(),
                }))
            }
            Err(e) => Err(ConlluError::malformed(start_line, e.to_string())),
        }
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<Block, ConlluError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_block().transpose()
    }
}

fn parse_bio(value: &str, line: usize) -> Result<Option<Bio>, ConlluError> {
    if value == "O" {
        return Ok(None);
    }
    let bio = match value.split_once('-') {
        Some(("B", ty)) if !ty.is_empty() => Bio::Begin(ty.to_owned()),
        Some(("I", ty)) if !ty.is_empty() => Bio::Inside(ty.to_owned()),
        _ => {
            return Err(ConlluError::malformed(
                line,
                format!("bad BIO value {value:?}"),
            ))
        }
    };
    Ok(Some(bio))
}

/// Resolves BIO tags to maximal runs. An `I-X` that does not continue an
/// `X` run starts a new one.
fn resolve_bio<'a>(tags: impl Iterator<Item = Option<&'a Bio>>) -> Vec<Option<(String, Span)>> {
    let tags: Vec<Option<&Bio>> = tags.collect();
    let mut out: Vec<Option<(String, Span)>> = vec![None; tags.len()];
    let mut i = 0;
    while i < tags.len() {
        let ty = match tags[i] {
            None => {
                i += 1;
                continue;
            }
            Some(Bio::Begin(ty)) | Some(Bio::Inside(ty)) => ty,
        };
        let mut end = i + 1;
        while end < tags.len() {
            match tags[end] {
                Some(Bio::Inside(next)) if next == ty => end += 1,
                _ => break,
            }
        }
        for slot in &mut out[i..end] {
            *slot = Some((ty.clone(), Span::new(i, end)));
        }
        i = end;
    }
    out
}

/// Reads a whole stream into a corpus.
pub fn ingest_conllu<R: BufRead>(input: R, options: &IngestOptions) -> Result<Corpus, ConlluError> {
    let mut corpus = Corpus::new();
    ingest_into(&mut corpus, input, options)?;
    corpus.meta.ingested_at = now();
    Ok(corpus)
}

/// Appends a stream to an existing corpus, keeping ids unique across calls.
pub fn ingest_into<R: BufRead>(
    corpus: &mut Corpus,
    input: R,
    options: &IngestOptions,
) -> Result<(), ConlluError> {
    let mut reader = ConlluReader::new(input, options.clone());
    while let Some(block) = reader.read_block()? {
        match block {
            Block::Sentence(s) => {
                let line = reader.line_no;
                corpus
                    .push(s)
                    .map_err(|e| ConlluError::DuplicateSentenceId { line, id: e.0 })?;
            }
            Block::Skipped(skip) => corpus.meta.skipped.push(skip),
        }
    }
    Ok(())
}

/// Reads CoNLL-U files in order into one corpus.
pub fn ingest_files<P: AsRef<std::path::Path>>(
    paths: &[P],
    options: &IngestOptions,
) -> Result<Corpus, (String, ConlluError)> {
    let mut corpus = Corpus::new();
    for path in paths {
        let path = path.as_ref();
        let name = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| (name.clone(), e.into()))?;
        ingest_into(&mut corpus, io::BufReader::new(file), options).map_err(|e| (name.clone(), e))?;
        corpus.meta.sources.push(name);
    }
    corpus.meta.ingested_at = now();
    Ok(corpus)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Renders one sentence block in the dialect.
///
/// The first incoming edge of each token goes to HEAD/DEPREL; when a token
/// has more than one incoming edge all of them are listed in DEPS.
pub fn render_sentence(s: &SentenceGraph, tag_column: TagColumn) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sent_id = {}", s.id());
    let _ = writeln!(out, "# text = {}", s.text());
    for t in s.tokens() {
        let incoming: Vec<_> = s.incoming(t.index).collect();
        let (head, deprel) = match incoming.first() {
            Some(e) => ((e.head + 1).to_string(), e.label.clone()),
            None => ("0".to_owned(), "root".to_owned()),
        };
        let deps = if incoming.len() > 1 {
            let mut items: Vec<_> = incoming.iter().map(|e| (e.head, &e.label)).collect();
            items.sort();
            items
                .iter()
                .map(|(h, l)| format!("{}:{}", h + 1, l))
                .collect::<Vec<_>>()
                .join("|")
        } else {
            "_".to_owned()
        };
        let (upos, xpos) = match tag_column {
            TagColumn::Upos => (t.tag.as_str(), "_"),
            TagColumn::Xpos => ("_", t.tag.as_str()),
        };
        let mut misc = Vec::new();
        if let (Some(ty), Some(span)) = (&t.entity, t.entity_span) {
            let prefix = if span.start == t.index { "B" } else { "I" };
            misc.push(format!("Entity={prefix}-{ty}"));
        }
        if let Some(span) = t.chunk_span {
            let prefix = if span.start == t.index { "B" } else { "I" };
            misc.push(format!("Chunk={prefix}-NP"));
        }
        if !t.space_after {
            misc.push("SpaceAfter=No".to_owned());
        }
        let misc = if misc.is_empty() {
            "_".to_owned()
        } else {
            misc.join("|")
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t{}\t{}",
            t.index + 1,
            t.word,
            t.lemma,
            upos,
            xpos,
            head,
            deprel,
            deps,
            misc
        );
    }
    out.push('\n');
    out
}

pub fn render_corpus(corpus: &Corpus, tag_column: TagColumn) -> String {
    corpus
        .sentences()
        .iter()
        .map(|s| render_sentence(s, tag_column))
        .collect()
}
