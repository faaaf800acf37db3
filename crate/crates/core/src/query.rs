//! The example-based markup language.
//!
//! A query is an example sentence with some words marked:
//!
//! ```text
//! item    := [ "<>" ] [ "$" | [ name ] ":" ] [ "[" constraints "]" ] word
//! name    := [A-Za-z_][A-Za-z0-9_]*
//! ```
//!
//! Items are separated by whitespace. `name:word` is a named capture,
//! `:word` a capture whose name is derived from the word, `$word` an
//! anchor (matched but not captured) and `<>` asks for the captured token
//! to be expanded to its entity or NP chunk.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Capture {
    None,
    /// Captured under a name generated from the word.
    Auto,
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryToken {
    /// The word with markup stripped.
    pub surface: String,
    pub capture: Capture,
    pub is_anchor: bool,
    pub expand: bool,
    /// Raw text between the brackets; `Some("")` for an explicit `[]`.
    pub constraint_spec: Option<String>,
    /// Character offset of the item in the query string.
    pub offset: usize,
    /// Character offset of the first character inside the brackets.
    pub spec_offset: Option<usize>,
}

impl QueryToken {
    pub fn is_marked(&self) -> bool {
        self.is_anchor || self.capture != Capture::None
    }

    fn without_offsets(&self) -> QueryToken {
        QueryToken {
            offset: 0,
            spec_offset: None,
            ..self.clone()
        }
    }
}

impl fmt::Display for QueryToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.expand {
            f.write_str("<>")?;
        }
        if self.is_anchor {
            f.write_str("$")?;
        } else {
            match &self.capture {
                Capture::None => {}
                Capture::Auto => f.write_str(":")?,
                Capture::Named(name) => write!(f, "{name}:")?,
            }
        }
        if let Some(spec) = &self.constraint_spec {
            write!(f, "[{spec}]")?;
        }
        f.write_str(&self.surface)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryTokenSeq {
    tokens: Vec<QueryToken>,
    original: String,
}

impl QueryTokenSeq {
    pub fn tokens(&self) -> &[QueryToken] {
        &self.tokens
    }

    pub fn original(&self) -> &str {
        &self.original
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The example sentence, markup stripped.
    pub fn words(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    /// Canonical markup: one space between items.
    pub fn to_markup(&self) -> String {
        self.tokens
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The tokens with source offsets zeroed, for structural comparison.
    pub fn structure(&self) -> Vec<QueryToken> {
        self.tokens.iter().map(QueryToken::without_offsets).collect()
    }
}

/// Positions are character offsets into the query string.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("capture name {name:?} is used more than once")]
    DuplicateCapture { name: String, position: usize },
    #[error("the expansion marker <> needs a captured word")]
    InvalidExpansion { position: usize },
    #[error("{message}")]
    Syntax { message: String, position: usize },
    #[error("no word is marked; mark at least one word with ':' or '$'")]
    NoMarkedWords,
}

impl QueryError {
    pub fn position(&self) -> usize {
        match self {
            QueryError::DuplicateCapture { position, .. }
            | QueryError::InvalidExpansion { position }
            | QueryError::Syntax { position, .. } => *position,
            QueryError::NoMarkedWords => 0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::DuplicateCapture { .. } => "DuplicateCapture",
            QueryError::InvalidExpansion { .. } => "InvalidExpansion",
            QueryError::Syntax { .. } => "SyntaxError",
            QueryError::NoMarkedWords => "NoMarkedWords",
        }
    }

    fn syntax(message: impl Into<String>, position: usize) -> Self {
        QueryError::Syntax {
            message: message.into(),
            position,
        }
    }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn parse_query(q: &str) -> Result<QueryTokenSeq, QueryError> {
    let chars: Vec<char> = q.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        tokens.push(parse_item(&chars[start..i], start)?);
    }
    if tokens.is_empty() {
        return Err(QueryError::syntax("empty query", 0));
    }
    if !tokens.iter().any(QueryToken::is_marked) {
        return Err(QueryError::NoMarkedWords);
    }
    let mut names = HashSet::new();
    for t in &tokens {
        if let Capture::Named(name) = &t.capture {
            if !names.insert(name.as_str()) {
                return Err(QueryError::DuplicateCapture {
                    name: name.clone(),
                    position: t.offset,
                });
            }
        }
    }
    Ok(QueryTokenSeq {
        tokens,
        original: q.to_owned(),
    })
}

fn parse_item(item: &[char], base: usize) -> Result<QueryToken, QueryError> {
    let mut p = 0;
    let expand = item.starts_with(&['<', '>']);
    if expand {
        p += 2;
    }

    let mut is_anchor = false;
    let mut capture = Capture::None;
    if item.get(p) == Some(&'$') {
        is_anchor = true;
        p += 1;
        // `$:word` reads the same as `$word`
        if item.get(p) == Some(&':') {
            p += 1;
        }
    } else if item.get(p) == Some(&':') {
        capture = Capture::Auto;
        p += 1;
    } else if item.get(p).is_some_and(|&c| is_name_start(c)) {
        let mut q = p + 1;
        while q < item.len() && is_name_char(item[q]) {
            q += 1;
        }
        if item.get(q) == Some(&':') {
            capture = Capture::Named(item[p..q].iter().collect());
            p = q + 1;
        }
    }
    let marked = is_anchor || capture != Capture::None;

    let mut constraint_spec = None;
    let mut spec_offset = None;
    if item.get(p) == Some(&'[') {
        let open = p;
        let close = matching_bracket(item, open)
            .ok_or_else(|| QueryError::syntax("unbalanced '['", base + open))?;
        if !marked {
            return Err(QueryError::syntax(
                "constraints need a marked word; add ':' or '$' before '['",
                base + open,
            ));
        }
        constraint_spec = Some(item[open + 1..close].iter().collect());
        spec_offset = Some(base + open + 1);
        p = close + 1;
    }

    let surface = &item[p..];
    if surface.is_empty() {
        return Err(QueryError::syntax("missing word after markup", base + p));
    }
    if let Some(k) = surface.iter().position(|&c| c == '[' || c == ']') {
        let message = if surface[k] == '[' {
            "unbalanced '['"
        } else {
            "unbalanced ']'"
        };
        return Err(QueryError::syntax(message, base + p + k));
    }
    if marked && surface[0] == ':' {
        return Err(QueryError::syntax("unexpected ':'", base + p));
    }
    if expand && (is_anchor || capture == Capture::None) {
        return Err(QueryError::InvalidExpansion { position: base });
    }

    Ok(QueryToken {
        surface: surface.iter().collect(),
        capture,
        is_anchor,
        expand,
        constraint_spec,
        offset: base,
        spec_offset,
    })
}

/// Index of the `]` closing the `[` at `open`; nested brackets (as in
/// `/VB[DZN]/`) and backslash escapes are skipped.
fn matching_bracket(item: &[char], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = open;
    while i < item.len() {
        match item[i] {
            '\\' => i += 1,
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}
