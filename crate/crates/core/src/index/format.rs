//! Byte-level layout of the index artifact.
//!
//! All fixed-width integers are little-endian. The file is
//!
//! ```text
//! header          HEADER_LEN bytes
//! dictionary      feature_count * DICT_ENTRY_LEN bytes, sorted by (kind, value)
//! strings         feature values, concatenated
//! postings        per feature: varint(sentence delta), varint(token) pairs
//! sentence table  sentence_count * SENTENCE_ENTRY_LEN bytes
//! stored corpus   one record per sentence (see `encode_sentence`)
//! ```
//!
//! Header:
//!
//! ```text
//!   0  magic            8 bytes  "DEPSIDX\0"
//!   8  version          u32
//!  12  reserved         u32 (0)
//!  16  sentence_count   u64
//!  24  feature_count    u64
//!  32  dictionary       u64 offset, u64 length
//!  48  strings          u64 offset, u64 length
//!  64  postings         u64 offset, u64 length
//!  80  sentence table   u64 offset, u64 length
//!  96  stored corpus    u64 offset, u64 length
//! 112  checksum         32 bytes, SHA-256 of the stored-corpus region
//! ```
//!
//! Dictionary entry:
//!
//! ```text
//!   0  kind             u8, 3 bytes padding
//!   4  value length     u32
//!   8  value offset     u64 (into strings)
//!  16  postings offset  u64 (into postings)
//!  24  postings bytes   u32
//!  28  postings count   u32
//! ```
//!
//! Sentence table entry: record offset `u64` (into stored corpus), record
//! length `u32`, token count `u32`.

use crate::corpus::{DepEdge, SentenceGraph, Span, Token};

pub const MAGIC: [u8; 8] = *b"DEPSIDX\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 144;
pub const DICT_ENTRY_LEN: usize = 32;
pub const SENTENCE_ENTRY_LEN: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Section {
    pub offset: u64,
    pub len: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub sentence_count: u64,
    pub feature_count: u64,
    pub dictionary: Section,
    pub strings: Section,
    pub postings: Section,
    pub sentences: Section,
    pub stored: Section,
    pub checksum: [u8; 32],
}

impl Header {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&MAGIC);
        out[8..12].copy_from_slice(&self.version.to_le_bytes());
        out[16..24].copy_from_slice(&self.sentence_count.to_le_bytes());
        out[24..32].copy_from_slice(&self.feature_count.to_le_bytes());
        let sections = [
            self.dictionary,
            self.strings,
            self.postings,
            self.sentences,
            self.stored,
        ];
        for (i, s) in sections.iter().enumerate() {
            let at = 32 + i * 16;
            out[at..at + 8].copy_from_slice(&s.offset.to_le_bytes());
            out[at + 8..at + 16].copy_from_slice(&s.len.to_le_bytes());
        }
        out[112..144].copy_from_slice(&self.checksum);
        out
    }

    /// Reads a header; `Err` describes the first problem found.
    pub fn decode(bytes: &[u8]) -> Result<Header, HeaderError> {
        if bytes.len() < HEADER_LEN || bytes[0..8] != MAGIC {
            return Err(HeaderError::Magic);
        }
        let version = read_u32(bytes, 8);
        if version != VERSION {
            return Err(HeaderError::Version(version));
        }
        let section = |i: usize| Section {
            offset: read_u64(bytes, 32 + i * 16),
            len: read_u64(bytes, 40 + i * 16),
        };
        let mut checksum = [0u8; 32];
        checksum.copy_from_slice(&bytes[112..144]);
        Ok(Header {
            version,
            sentence_count: read_u64(bytes, 16),
            feature_count: read_u64(bytes, 24),
            dictionary: section(0),
            strings: section(1),
            postings: section(2),
            sentences: section(3),
            stored: section(4),
            checksum,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderError {
    Magic,
    Version(u32),
}

pub fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

pub fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

/// Decodes a varint at `*pos`, advancing it. `None` on truncated input.
#[inline]
pub fn read_varint(bytes: &[u8], pos: &mut usize) -> Option<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *bytes.get(*pos)?;
        *pos += 1;
        v |= u64::from(b & 0x7f) << shift;
        if b < 0x80 {
            return Some(v);
        }
        shift += 7;
        if shift > 63 {
            return None;
        }
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    write_varint(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

const SPACE_AFTER: u8 = 1;
const HAS_ENTITY: u8 = 2;
const HAS_CHUNK: u8 = 4;

/// Stored-corpus record:
///
/// ```text
/// str id, varint token_count,
/// per token: str word, str lemma, str tag, str entity ("" when none),
///            u8 flags, [varint start, varint end] per present span,
/// varint edge_count, per edge: varint head, varint dependent, str label
/// ```
///
/// `str` is a varint byte length followed by UTF-8 bytes.
pub fn encode_sentence(out: &mut Vec<u8>, s: &SentenceGraph) {
    write_str(out, s.id());
    write_varint(out, s.len() as u64);
    for t in s.tokens() {
        write_str(out, &t.word);
        write_str(out, &t.lemma);
        write_str(out, &t.tag);
        write_str(out, t.entity.as_deref().unwrap_or(""));
        let mut flags = 0;
        if t.space_after {
            flags |= SPACE_AFTER;
        }
        if t.entity_span.is_some() {
            flags |= HAS_ENTITY;
        }
        if t.chunk_span.is_some() {
            flags |= HAS_CHUNK;
        }
        out.push(flags);
        for span in [t.entity_span, t.chunk_span].into_iter().flatten() {
            write_varint(out, span.start as u64);
            write_varint(out, span.end as u64);
        }
    }
    write_varint(out, s.edges().len() as u64);
    for e in s.edges() {
        write_varint(out, e.head as u64);
        write_varint(out, e.dependent as u64);
        write_str(out, &e.label);
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn varint(&mut self) -> Result<u64, String> {
        read_varint(self.bytes, &mut self.pos).ok_or_else(|| "truncated varint".to_string())
    }

    fn usize(&mut self) -> Result<usize, String> {
        self.varint().map(|v| v as usize)
    }

    fn str(&mut self) -> Result<&'a str, String> {
        let len = self.usize()?;
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| "truncated string".to_string())?;
        let s = std::str::from_utf8(&self.bytes[self.pos..end]).map_err(|e| e.to_string())?;
        self.pos = end;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, String> {
        let b = *self.bytes.get(self.pos).ok_or("truncated record")?;
        self.pos += 1;
        Ok(b)
    }

    fn span(&mut self) -> Result<Span, String> {
        Ok(Span::new(self.usize()?, self.usize()?))
    }
}

/// The sentence id at the start of a record.
pub fn decode_sentence_id(record: &[u8]) -> Result<&str, String> {
    Cursor {
        bytes: record,
        pos: 0,
    }
    .str()
}

pub fn decode_sentence(record: &[u8]) -> Result<SentenceGraph, String> {
    let mut c = Cursor {
        bytes: record,
        pos: 0,
    };
    let id = c.str()?.to_owned();
    let n = c.usize()?;
    let mut tokens = Vec::with_capacity(n.min(4096));
    for index in 0..n {
        let word = c.str()?.to_owned();
        let lemma = c.str()?.to_owned();
        let tag = c.str()?.to_owned();
        let entity = c.str()?;
        let entity = (!entity.is_empty()).then(|| entity.to_owned());
        let flags = c.byte()?;
        let entity_span = if flags & HAS_ENTITY != 0 {
            Some(c.span()?)
        } else {
            None
        };
        let chunk_span = if flags & HAS_CHUNK != 0 {
            Some(c.span()?)
        } else {
            None
        };
        tokens.push(Token {
            index,
            word,
            lemma,
            tag,
            entity,
            entity_span,
            chunk_span,
            space_after: flags & SPACE_AFTER != 0,
        });
    }
    let m = c.usize()?;
    let mut edges = Vec::with_capacity(m.min(4096));
    for _ in 0..m {
        let head = c.usize()?;
        let dependent = c.usize()?;
        edges.push(DepEdge::new(head, dependent, c.str()?));
    }
    SentenceGraph::new(id, tokens, edges).map_err(|e| e.to_string())
}
