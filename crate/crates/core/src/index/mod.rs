//! Inverted index over token features plus the stored corpus.
//!
//! Each token contributes its word, lemma, tag, entity type (when it has
//! one) and the labels of its incoming and outgoing edges. A posting is a
//! `(sentence ordinal, token index)` pair. The whole index lives in one
//! little-endian file (layout in [`format`]) that is memory-mapped on open.

pub mod format;
mod plan;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use memmap2::Mmap;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, SentenceGraph};
use format::{
    read_u32, read_u64, read_varint, write_varint, Header, HeaderError, Section, DICT_ENTRY_LEN,
    HEADER_LEN, SENTENCE_ENTRY_LEN, VERSION,
};
pub use plan::{plan, CandidatePlan, FeatureKey, NodePlan, Requirement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum FeatureKind {
    Word = 0,
    Lemma = 1,
    Tag = 2,
    Entity = 3,
    InLabel = 4,
    OutLabel = 5,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Word,
        FeatureKind::Lemma,
        FeatureKind::Tag,
        FeatureKind::Entity,
        FeatureKind::InLabel,
        FeatureKind::OutLabel,
    ];

    pub fn from_u8(v: u8) -> Option<FeatureKind> {
        FeatureKind::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Word => "word",
            FeatureKind::Lemma => "lemma",
            FeatureKind::Tag => "tag",
            FeatureKind::Entity => "entity",
            FeatureKind::InLabel => "in_label",
            FeatureKind::OutLabel => "out_label",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("index format version/magic mismatch: {0}")]
    Format(String),
    #[error("index is corrupt: {0}")]
    Corrupt(String),
    #[error("duplicate sentence id {0:?}")]
    DuplicateSentenceId(String),
    #[error("index is limited to {} sentences", u32::MAX)]
    TooManySentences,
}

impl From<HeaderError> for IndexError {
    fn from(e: HeaderError) -> Self {
        match e {
            HeaderError::Magic => IndexError::Format("not an index file".into()),
            HeaderError::Version(v) => {
                IndexError::Format(format!("file has version {v}, expected {VERSION}"))
            }
        }
    }
}

#[derive(Default)]
struct PostingBuf {
    bytes: Vec<u8>,
    count: u32,
    last_sentence: u32,
}

/// Accumulates sentences one at a time; memory grows with the encoded
/// index, not with the parsed corpus.
#[derive(Default)]
pub struct IndexBuilder {
    postings: [HashMap<String, PostingBuf>; 6],
    sentences: Vec<u8>,
    stored: Vec<u8>,
    ids: HashSet<String>,
    count: u32,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Adds a sentence and returns its ordinal.
    pub fn add_sentence(&mut self, s: &SentenceGraph) -> Result<u32, IndexError> {
        if self.count == u32::MAX {
            return Err(IndexError::TooManySentences);
        }
        if !self.ids.insert(s.id().to_owned()) {
            return Err(IndexError::DuplicateSentenceId(s.id().to_owned()));
        }
        let ord = self.count;
        self.count += 1;

        let start = self.stored.len();
        format::encode_sentence(&mut self.stored, s);
        self.sentences
            .extend_from_slice(&(start as u64).to_le_bytes());
        self.sentences
            .extend_from_slice(&((self.stored.len() - start) as u32).to_le_bytes());
        self.sentences
            .extend_from_slice(&(s.len() as u32).to_le_bytes());

        for t in s.tokens() {
            let tok = t.index as u32;
            self.post(FeatureKind::Word, &t.word, ord, tok);
            self.post(FeatureKind::Lemma, &t.lemma, ord, tok);
            self.post(FeatureKind::Tag, &t.tag, ord, tok);
            if let Some(e) = &t.entity {
                self.post(FeatureKind::Entity, e, ord, tok);
            }
            let incoming = s.incoming(t.index).map(|e| e.label.as_str());
            self.post_labels(FeatureKind::InLabel, incoming, ord, tok);
            let outgoing = s.outgoing(t.index).map(|e| e.label.as_str());
            self.post_labels(FeatureKind::OutLabel, outgoing, ord, tok);
        }
        Ok(ord)
    }

    fn post_labels<'a>(
        &mut self,
        kind: FeatureKind,
        labels: impl Iterator<Item = &'a str>,
        sentence: u32,
        token: u32,
    ) {
        let mut seen: Vec<&str> = Vec::new();
        for l in labels {
            if !seen.contains(&l) {
                seen.push(l);
                self.post(kind, l, sentence, token);
            }
        }
    }

    fn post(&mut self, kind: FeatureKind, value: &str, sentence: u32, token: u32) {
        let map = &mut self.postings[kind as usize];
        let buf = match map.get_mut(value) {
            Some(b) => b,
            None => map.entry(value.to_owned()).or_default(),
        };
        write_varint(&mut buf.bytes, u64::from(sentence - buf.last_sentence));
        write_varint(&mut buf.bytes, u64::from(token));
        buf.last_sentence = sentence;
        buf.count += 1;
    }

    /// Serializes the index. Output bytes depend only on the sentences
    /// added and their order.
    pub fn write_to<W: Write>(self, w: &mut W) -> io::Result<()> {
        let mut features: Vec<(u8, &String, &PostingBuf)> = Vec::new();
        for kind in FeatureKind::ALL {
            for (value, buf) in &self.postings[kind as usize] {
                features.push((kind as u8, value, buf));
            }
        }
        features.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut dictionary = Vec::with_capacity(features.len() * DICT_ENTRY_LEN);
        let mut strings = Vec::new();
        let mut postings_len = 0u64;
        for (kind, value, buf) in &features {
            dictionary.push(*kind);
            dictionary.extend_from_slice(&[0; 3]);
            dictionary.extend_from_slice(&(value.len() as u32).to_le_bytes());
            dictionary.extend_from_slice(&(strings.len() as u64).to_le_bytes());
            dictionary.extend_from_slice(&postings_len.to_le_bytes());
            dictionary.extend_from_slice(&(buf.bytes.len() as u32).to_le_bytes());
            dictionary.extend_from_slice(&buf.count.to_le_bytes());
            strings.extend_from_slice(value.as_bytes());
            postings_len += buf.bytes.len() as u64;
        }

        let mut offset = HEADER_LEN as u64;
        let mut section = |len: u64| {
            let s = Section { offset, len };
            offset += len;
            s
        };
        let header = Header {
            version: VERSION,
            sentence_count: u64::from(self.count),
            feature_count: features.len() as u64,
            dictionary: section(dictionary.len() as u64),
            strings: section(strings.len() as u64),
            postings: section(postings_len),
            sentences: section(self.sentences.len() as u64),
            stored: section(self.stored.len() as u64),
            checksum: Sha256::digest(&self.stored).into(),
        };
        w.write_all(&header.encode())?;
        w.write_all(&dictionary)?;
        w.write_all(&strings)?;
        for (_, _, buf) in &features {
            w.write_all(&buf.bytes)?;
        }
        w.write_all(&self.sentences)?;
        w.write_all(&self.stored)?;
        w.flush()
    }

    pub fn finish(self) -> IndexArtifact {
        let mut bytes = Vec::new();
        self.write_to(&mut bytes).expect("writing to memory");
        IndexArtifact::from_bytes(bytes).expect("freshly built index is valid")
    }

    pub fn finish_to_file(self, path: &Path) -> Result<(), IndexError> {
        let io_err = |source| IndexError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        self.write_to(&mut BufWriter::with_capacity(1 << 20, file))
            .map_err(io_err)
    }
}

enum Bytes {
    Owned(Vec<u8>),
    Mapped(Mmap),
}

impl Deref for Bytes {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        match self {
            Bytes::Owned(v) => v,
            Bytes::Mapped(m) => m,
        }
    }
}

/// A loaded index. Opening validates the header and tables but decodes
/// nothing else; sentences are decoded on demand.
pub struct IndexArtifact {
    bytes: Bytes,
    header: Header,
}

impl fmt::Debug for IndexArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexArtifact")
            .field("sentences", &self.header.sentence_count)
            .field("features", &self.header.feature_count)
            .finish()
    }
}

impl IndexArtifact {
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a SentenceGraph>) -> Result<Self, IndexError> {
        let mut b = IndexBuilder::new();
        for s in sentences {
            b.add_sentence(s)?;
        }
        Ok(b.finish())
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::build(corpus.sentences()).expect("corpus sentence ids are unique")
    }

    pub fn open(path: &Path) -> Result<Self, IndexError> {
        let file = File::open(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        // SAFETY: the file is opened read-only and the map is never written;
        // all reads are bounds-checked slices.
        let map = unsafe { Mmap::map(&file) }.map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::validate(Bytes::Mapped(map))
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, IndexError> {
        Self::validate(Bytes::Owned(bytes))
    }

    fn validate(bytes: Bytes) -> Result<Self, IndexError> {
        let header = Header::decode(&bytes)?;
        let corrupt = |m: &str| Err(IndexError::Corrupt(m.to_owned()));
        let mut expected = HEADER_LEN as u64;
        for s in [
            header.dictionary,
            header.strings,
            header.postings,
            header.sentences,
            header.stored,
        ] {
            if s.offset != expected {
                return corrupt("sections are not contiguous");
            }
            expected = match s.offset.checked_add(s.len) {
                Some(e) => e,
                None => return corrupt("section length overflows"),
            };
        }
        if expected != bytes.len() as u64 {
            return corrupt("file length does not match the header");
        }
        if Some(header.dictionary.len) != header.feature_count.checked_mul(DICT_ENTRY_LEN as u64) {
            return corrupt("dictionary size does not match the feature count");
        }
        if Some(header.sentences.len)
            != header.sentence_count.checked_mul(SENTENCE_ENTRY_LEN as u64)
        {
            return corrupt("sentence table size does not match the sentence count");
        }
        if header.sentence_count > u64::from(u32::MAX) {
            return corrupt("too many sentences");
        }
        let index = IndexArtifact { bytes, header };
        let mut previous: Option<(u8, &[u8])> = None;
        for i in 0..index.feature_count() {
            let e = index.entry(i);
            if FeatureKind::from_u8(e.kind).is_none() {
                return corrupt("unknown feature kind");
            }
            if e.value_off.checked_add(e.value_len).is_none_or(|end| end > index.header.strings.len) {
                return corrupt("feature value out of bounds");
            }
            if e.postings_off.checked_add(e.postings_len).is_none_or(|end| end > index.header.postings.len) {
                return corrupt("posting list out of bounds");
            }
            let value = index.raw_value(&e);
            if std::str::from_utf8(value).is_err() {
                return corrupt("feature value is not UTF-8");
            }
            if previous.is_some_and(|p| p >= (e.kind, value)) {
                return corrupt("dictionary is not sorted");
            }
            previous = Some((e.kind, value));
        }
        for ord in 0..index.len() {
            let (off, len, _) = index.sentence_entry(ord as u32);
            if off.checked_add(len).is_none_or(|end| end > index.header.stored.len) {
                return corrupt("sentence record out of bounds");
            }
        }
        Ok(index)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn write(&self, path: &Path) -> Result<(), IndexError> {
        std::fs::write(path, self.as_bytes()).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.header.sentence_count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.header.feature_count as usize
    }

    pub fn version(&self) -> u32 {
        self.header.version
    }

    /// SHA-256 of the stored corpus, as recorded at build time.
    pub fn checksum(&self) -> [u8; 32] {
        self.header.checksum
    }

    /// Recomputes the stored-corpus checksum and compares.
    pub fn verify_checksum(&self) -> bool {
        let digest: [u8; 32] = Sha256::digest(self.section(self.header.stored)).into();
        digest == self.header.checksum
    }

    fn section(&self, s: Section) -> &[u8] {
        &self.bytes[s.offset as usize..(s.offset + s.len) as usize]
    }

    fn entry(&self, i: usize) -> DictEntry {
        let at = self.header.dictionary.offset as usize + i * DICT_ENTRY_LEN;
        let b = &self.bytes;
        DictEntry {
            kind: b[at],
            value_len: u64::from(read_u32(b, at + 4)),
            value_off: read_u64(b, at + 8),
            postings_off: read_u64(b, at + 16),
            postings_len: u64::from(read_u32(b, at + 24)),
            count: read_u32(b, at + 28),
        }
    }

    fn raw_value(&self, e: &DictEntry) -> &[u8] {
        let start = (self.header.strings.offset + e.value_off) as usize;
        &self.bytes[start..start + e.value_len as usize]
    }

    fn value(&self, e: &DictEntry) -> &str {
        std::str::from_utf8(self.raw_value(e)).unwrap_or_default()
    }

    fn find(&self, kind: FeatureKind, value: &str) -> Option<DictEntry> {
        let key = (kind as u8, value.as_bytes());
        let (mut lo, mut hi) = (0, self.feature_count());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let e = self.entry(mid);
            match (e.kind, self.raw_value(&e)).cmp(&key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(e),
            }
        }
        None
    }

    /// Postings of one feature; empty when the feature never occurs.
    pub fn postings(&self, kind: FeatureKind, value: &str) -> Postings<'_> {
        match self.find(kind, value) {
            Some(e) => {
                let start = (self.header.postings.offset + e.postings_off) as usize;
                Postings {
                    bytes: &self.bytes[start..start + e.postings_len as usize],
                    count: e.count,
                }
            }
            None => Postings {
                bytes: &[],
                count: 0,
            },
        }
    }

    /// Every feature with its posting count, in dictionary order.
    pub fn features(&self) -> impl Iterator<Item = (FeatureKind, &str, u32)> + '_ {
        (0..self.feature_count()).map(move |i| {
            let e = self.entry(i);
            let kind = FeatureKind::from_u8(e.kind).expect("validated on open");
            (kind, self.value(&e), e.count)
        })
    }

    fn sentence_entry(&self, ord: u32) -> (u64, u64, u32) {
        let at = self.header.sentences.offset as usize + ord as usize * SENTENCE_ENTRY_LEN;
        (
            read_u64(&self.bytes, at),
            u64::from(read_u32(&self.bytes, at + 8)),
            read_u32(&self.bytes, at + 12),
        )
    }

    fn record(&self, ord: u32) -> &[u8] {
        let (off, len, _) = self.sentence_entry(ord);
        let start = (self.header.stored.offset + off) as usize;
        &self.bytes[start..start + len as usize]
    }

    pub fn token_count(&self, ord: u32) -> usize {
        self.sentence_entry(ord).2 as usize
    }

    pub fn sentence(&self, ord: u32) -> Result<SentenceGraph, IndexError> {
        if ord as usize >= self.len() {
            return Err(IndexError::Corrupt(format!("no sentence {ord}")));
        }
        format::decode_sentence(self.record(ord))
            .map_err(|e| IndexError::Corrupt(format!("sentence {ord}: {e}")))
    }

    pub fn sentence_id(&self, ord: u32) -> Result<&str, IndexError> {
        if ord as usize >= self.len() {
            return Err(IndexError::Corrupt(format!("no sentence {ord}")));
        }
        format::decode_sentence_id(self.record(ord))
            .map_err(|e| IndexError::Corrupt(format!("sentence {ord}: {e}")))
    }
}

struct DictEntry {
    kind: u8,
    value_len: u64,
    value_off: u64,
    postings_off: u64,
    postings_len: u64,
    count: u32,
}

/// An encoded posting list.
#[derive(Clone, Copy, Debug)]
pub struct Postings<'a> {
    bytes: &'a [u8],
    count: u32,
}

impl<'a> Postings<'a> {
    pub fn len(&self) -> usize {
        self.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn iter(&self) -> PostingIter<'a> {
        PostingIter {
            bytes: self.bytes,
            pos: 0,
            sentence: 0,
            remaining: self.count,
        }
    }
}

impl<'a> IntoIterator for Postings<'a> {
    type Item = (u32, u32);
    type IntoIter = PostingIter<'a>;

    fn into_iter(self) -> PostingIter<'a> {
        self.iter()
    }
}

/// Yields `(sentence, token)` pairs in ascending order. Stops early on
/// malformed data.
pub struct PostingIter<'a> {
    bytes: &'a [u8],
    pos: usize,
    sentence: u32,
    remaining: u32,
}

impl Iterator for PostingIter<'_> {
    type Item = (u32, u32);

    #[inline]
    fn next(&mut self) -> Option<(u32, u32)> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let delta = read_varint(self.bytes, &mut self.pos)?;
        let token = read_varint(self.bytes, &mut self.pos)?;
        self.sentence = self.sentence.wrapping_add(delta as u32);
        Some((self.sentence, token as u32))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (0, Some(self.remaining as usize))
    }
}
