//! Example-based syntactic search over dependency-parsed corpora.
//!
//! A query is an example sentence with light markup. It is parsed, the
//! example sentence is dependency-parsed by a [`provider::ParseProvider`],
//! and the marked words plus the minimal connected part of the parse
//! become a [`builder::QueryGraph`]. The graph is answered by boolean
//! retrieval over an inverted [`index`] followed by exact verification in
//! the [`matcher`].

pub mod conllu;
pub mod constraint;
pub mod corpus;
pub mod engine;
pub mod export;
pub mod builder;
pub mod index;
pub mod matcher;
pub mod query;
pub mod provider;
pub mod steiner;
