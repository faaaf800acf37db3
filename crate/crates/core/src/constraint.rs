//! Within-token constraints: a conjunction over per-property value sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::corpus::Token;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    Word,
    Lemma,
    Tag,
    Entity,
}

impl Property {
    pub const ALL: [Property; 4] = [
        Property::Word,
        Property::Lemma,
        Property::Tag,
        Property::Entity,
    ];

    /// Accepts full names and the one-letter shorthands.
    pub fn from_name(name: &str) -> Option<Property> {
        match name {
            "word" | "w" => Some(Property::Word),
            "lemma" | "l" => Some(Property::Lemma),
            "tag" | "t" => Some(Property::Tag),
            "entity" | "e" => Some(Property::Entity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::Word => "word",
            Property::Lemma => "lemma",
            Property::Tag => "tag",
            Property::Entity => "entity",
        }
    }

    /// The token's value for this property; `None` for a missing entity.
    pub fn value_of(self, token: &Token) -> Option<&str> {
        match self {
            Property::Word => Some(&token.word),
            Property::Lemma => Some(&token.lemma),
            Property::Tag => Some(&token.tag),
            Property::Entity => token.entity.as_deref(),
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A regex that must match the whole property value.
#[derive(Clone, Debug)]
pub struct FullRegex {
    source: String,
    compiled: Regex,
}

impl FullRegex {
    pub fn new(source: &str) -> Result<Self, regex::Error> {
        let compiled = Regex::new(&format!("^(?:{source})$"))?;
        Ok(FullRegex {
            source: source.to_owned(),
            compiled,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_match(&self, value: &str) -> bool {
        self.compiled.is_match(value)
    }
}

impl PartialEq for FullRegex {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for FullRegex {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValueMatcher {
    /// Disjunction of exact, case-sensitive values.
    Literals(BTreeSet<String>),
    Regex(FullRegex),
}

impl ValueMatcher {
    pub fn literals<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ValueMatcher::Literals(values.into_iter().map(Into::into).collect())
    }

    pub fn matches(&self, value: &str) -> bool {
        match self {
            ValueMatcher::Literals(set) => set.contains(value),
            ValueMatcher::Regex(re) => re.is_match(value),
        }
    }
}

impl fmt::Display for ValueMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueMatcher::Literals(set) => {
                let values: Vec<&str> = set.iter().map(String::as_str).collect();
                f.write_str(&values.join("|"))
            }
            ValueMatcher::Regex(re) => write!(f, "/{}/", re.source().replace('/', "\\/")),
        }
    }
}

/// Conjunction over properties, disjunction within each property.
/// The empty constraint matches every token.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenConstraint {
    clauses: BTreeMap<Property, ValueMatcher>,
}

impl TokenConstraint {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn is_any(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Adds a clause; `false` if the property already has one.
    pub fn insert(&mut self, property: Property, matcher: ValueMatcher) -> bool {
        if self.clauses.contains_key(&property) {
            return false;
        }
        self.clauses.insert(property, matcher);
        true
    }

    pub fn with(mut self, property: Property, matcher: ValueMatcher) -> Self {
        self.clauses.insert(property, matcher);
        self
    }

    pub fn remove(&mut self, property: Property) -> Option<ValueMatcher> {
        self.clauses.remove(&property)
    }

    pub fn get(&self, property: Property) -> Option<&ValueMatcher> {
        self.clauses.get(&property)
    }

    pub fn clauses(&self) -> impl Iterator<Item = (Property, &ValueMatcher)> {
        self.clauses.iter().map(|(p, m)| (*p, m))
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }
}

impl fmt::Display for TokenConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, m)) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str("&")?;
            }
            write!(f, "{p}={m}")?;
        }
        Ok(())
    }
}

/// True iff every clause holds for the token.
pub fn satisfies(token: &Token, constraint: &TokenConstraint) -> bool {
    constraint
        .clauses()
        .all(|(p, m)| p.value_of(token).is_some_and(|v| m.matches(v)))
}

/// Errors carry a character offset into the spec text.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("unknown property {name:?}")]
    UnknownProperty { name: String, offset: usize },
    #[error("invalid regular expression: {message}")]
    Regex { message: String, offset: usize },
    #[error("the query word has no {property} to take the value from")]
    MissingProperty { property: Property, offset: usize },
    #[error("property {property} is constrained twice")]
    DuplicateProperty { property: Property, offset: usize },
    #[error("empty value")]
    EmptyValue { offset: usize },
    #[error("{message}")]
    Syntax { message: String, offset: usize },
}

impl ConstraintError {
    pub fn offset(&self) -> usize {
        match self {
            ConstraintError::UnknownProperty { offset, .. }
            | ConstraintError::Regex { offset, .. }
            | ConstraintError::MissingProperty { offset, .. }
            | ConstraintError::DuplicateProperty { offset, .. }
            | ConstraintError::EmptyValue { offset }
            | ConstraintError::Syntax { offset, .. } => *offset,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConstraintError::UnknownProperty { .. } => "UnknownProperty",
            ConstraintError::Regex { .. } => "RegexError",
            ConstraintError::MissingProperty { .. } => "MissingProperty",
            ConstraintError::DuplicateProperty { .. } => "DuplicateProperty",
            ConstraintError::EmptyValue { .. } => "EmptyValue",
            ConstraintError::Syntax { .. } => "SyntaxError",
        }
    }
}

/// Parses the text between `[` and `]`.
///
/// Clauses are `&`-separated. A clause is `prop=v1|v2|...`, `prop=/regex/`
/// or a bare `prop`, which takes its single value from `source`.
pub fn parse_constraint_spec(
    spec: &str,
    source: &Token,
) -> Result<TokenConstraint, ConstraintError> {
    let chars: Vec<char> = spec.chars().collect();
    let mut constraint = TokenConstraint::any();
    if chars.iter().all(|c| c.is_whitespace()) {
        return Ok(constraint);
    }
    let mut pos = 0;
    loop {
        let clause_start = pos;
        while pos < chars.len() && chars[pos] != '=' && chars[pos] != '&' {
            pos += 1;
        }
        let name: String = chars[clause_start..pos].iter().collect();
        let name = name.trim();
        let property = Property::from_name(name).ok_or_else(|| ConstraintError::UnknownProperty {
            name: name.to_owned(),
            offset: clause_start,
        })?;

        let matcher = if pos < chars.len() && chars[pos] == '=' {
            pos += 1;
            if pos < chars.len() && chars[pos] == '/' {
                let re_start = pos;
                pos += 1;
                let mut body = String::new();
                loop {
                    match chars.get(pos) {
                        None => {
                            return Err(ConstraintError::Syntax {
                                message: "unterminated regular expression".into(),
                                offset: re_start,
                            })
                        }
                        Some('\\') if chars.get(pos + 1) == Some(&'/') => {
                            body.push('/');
                            pos += 2;
                        }
                        Some('/') => {
                            pos += 1;
                            break;
                        }
                        Some(&c) => {
                            body.push(c);
                            pos += 1;
                        }
                    }
                }
                if body.is_empty() {
                    return Err(ConstraintError::EmptyValue { offset: re_start });
                }
                if pos < chars.len() && chars[pos] != '&' {
                    return Err(ConstraintError::Syntax {
                        message: "unexpected text after regular expression".into(),
                        offset: pos,
                    });
                }
                let re = FullRegex::new(&body).map_err(|e| ConstraintError::Regex {
                    message: e.to_string(),
                    offset: re_start,
                })?;
                ValueMatcher::Regex(re)
            } else {
                let mut values = BTreeSet::new();
                let mut value_start = pos;
                loop {
                    let at_end = pos >= chars.len() || chars[pos] == '&';
                    if at_end || chars[pos] == '|' {
                        let value: String = chars[value_start..pos].iter().collect();
                        if value.is_empty() {
                            return Err(ConstraintError::EmptyValue {
                                offset: value_start,
                            });
                        }
                        values.insert(value);
                        if at_end {
                            break;
                        }
                        value_start = pos + 1;
                    }
                    pos += 1;
                }
                ValueMatcher::Literals(values)
            }
        } else {
            let value = property
                .value_of(source)
                .ok_or(ConstraintError::MissingProperty {
                    property,
                    offset: clause_start,
                })?;
            ValueMatcher::literals([value])
        };

        if !constraint.insert(property, matcher) {
            return Err(ConstraintError::DuplicateProperty {
                property,
                offset: clause_start,
            });
        }
        if pos >= chars.len() {
            break;
        }
        // at '&'
        pos += 1;
    }
    Ok(constraint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(word: &str, lemma: &str, tag: &str, entity: Option<&str>) -> Token {
        let mut t = Token::new(0, word, lemma, tag);
        if let Some(e) = entity {
            t.entity = Some(e.into());
            t.entity_span = Some(crate::corpus::Span::single(0));
        }
        t
    }

    fn go() -> Token {
        tok("go", "go", "VB", None)
    }

    #[test]
    fn conjunction_of_disjunctions() {
        let c = parse_constraint_spec("tag=VBD|VBZ&lemma=buy", &go()).unwrap();
        let expected = TokenConstraint::any()
            .with(Property::Tag, ValueMatcher::literals(["VBD", "VBZ"]))
            .with(Property::Lemma, ValueMatcher::literals(["buy"]));
        assert_eq!(c, expected);
        assert!(satisfies(&tok("bought", "buy", "VBD", None), &c));
        assert!(satisfies(&tok("buys", "buy", "VBZ", None), &c));
        assert!(!satisfies(&tok("buying", "buy", "VBG", None), &c));
        assert!(!satisfies(&tok("sold", "sell", "VBD", None), &c));
    }

    #[test]
    fn bare_property_pulls_value() {
        let c = parse_constraint_spec("t", &go()).unwrap();
        assert_eq!(
            c,
            TokenConstraint::any().with(Property::Tag, ValueMatcher::literals(["VB"]))
        );
        let explicit = parse_constraint_spec("tag=VB", &go()).unwrap();
        assert_eq!(c, explicit);
    }

    #[test]
    fn lemma_list() {
        let c = parse_constraint_spec("l=receive|complete|earn|obtain|get", &go()).unwrap();
        assert_eq!(
            c,
            TokenConstraint::any().with(
                Property::Lemma,
                ValueMatcher::literals(["receive", "complete", "earn", "obtain", "get"])
            )
        );
    }

    #[test]
    fn empty_spec_matches_everything() {
        let c = parse_constraint_spec("", &go()).unwrap();
        assert!(c.is_any());
        assert!(satisfies(&tok("x", "y", "Z", None), &c));
    }

    #[test]
    fn regex_is_anchored() {
        let c = parse_constraint_spec("tag=/VB[DZN]/", &go()).unwrap();
        assert!(satisfies(&tok("x", "x", "VBN", None), &c));
        assert!(!satisfies(&tok("x", "x", "VB", None), &c));
        assert!(!satisfies(&tok("x", "x", "VBNX", None), &c));
        let loose = parse_constraint_spec("tag=/VB/", &go()).unwrap();
        assert!(!satisfies(&tok("x", "x", "VBD", None), &loose));
    }

    #[test]
    fn regex_with_separators_inside() {
        let c = parse_constraint_spec("word=/a|b&c/&tag=NN", &go()).unwrap();
        assert!(satisfies(&tok("b&c", "x", "NN", None), &c));
        assert!(satisfies(&tok("a", "x", "NN", None), &c));
        let slash = parse_constraint_spec(r"word=/and\/or/", &go()).unwrap();
        assert!(satisfies(&tok("and/or", "x", "CC", None), &slash));
    }

    #[test]
    fn entity_clause_needs_an_entity() {
        let c = TokenConstraint::any().with(Property::Entity, ValueMatcher::literals(["PERSON"]));
        assert!(!satisfies(&go(), &c));
        assert!(satisfies(&tok("Paul", "Paul", "NNP", Some("PERSON")), &c));
        let err = parse_constraint_spec("e", &go()).unwrap_err();
        assert!(matches!(
            err,
            ConstraintError::MissingProperty {
                property: Property::Entity,
                offset: 0
            }
        ));
        let pulled =
            parse_constraint_spec("e", &tok("Paul", "Paul", "NNP", Some("PERSON"))).unwrap();
        assert_eq!(pulled, c);
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_constraint_spec("w&colour=red", &go()).unwrap_err(),
            ConstraintError::UnknownProperty {
                name: "colour".into(),
                offset: 2
            }
        );
        assert!(matches!(
            parse_constraint_spec("tag=/VB[/", &go()),
            Err(ConstraintError::Regex { offset: 4, .. })
        ));
        assert!(matches!(
            parse_constraint_spec("tag=VB||VBD", &go()),
            Err(ConstraintError::EmptyValue { offset: 7 })
        ));
        assert!(matches!(
            parse_constraint_spec("t&tag=VB", &go()),
            Err(ConstraintError::DuplicateProperty { offset: 2, .. })
        ));
        assert!(matches!(
            parse_constraint_spec("tag=/VB", &go()),
            Err(ConstraintError::Syntax { .. })
        ));
        assert!(matches!(
            parse_constraint_spec("tag=", &go()),
            Err(ConstraintError::EmptyValue { .. })
        ));
    }

    #[test]
    fn display_is_canonical() {
        let c = parse_constraint_spec("lemma=buy&tag=VBZ|VBD", &go()).unwrap();
        assert_eq!(c.to_string(), "lemma=buy&tag=VBD|VBZ");
        let r = parse_constraint_spec("tag=/VB[DZN]/", &go()).unwrap();
        assert_eq!(r.to_string(), "tag=/VB[DZN]/");
    }

    #[test]
    fn regex_oracle_vb_dzn() {
        // /VB[DZN]/ spelled out as its literal set
        let oracle = ["VBD", "VBZ", "VBN"];
        let re = parse_constraint_spec("tag=/VB[DZN]/", &go()).unwrap();
        for tag in ["VB", "VBD", "VBZ", "VBN", "VBG", "VBP", "NN", "VBDZ", "XVBD"] {
            let t = tok("x", "x", tag, None);
            assert_eq!(satisfies(&t, &re), oracle.contains(&tag), "{tag}");
        }
    }
}
