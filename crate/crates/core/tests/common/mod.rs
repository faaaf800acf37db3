#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use depsearch_core::conllu::{ingest_conllu, IngestOptions};
use depsearch_core::corpus::Corpus;
use depsearch_core::engine::Engine;
use depsearch_core::index::IndexArtifact;
use depsearch_core::provider::FixtureProvider;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus() -> Corpus {
    let file = File::open(fixtures().join("corpus.conllu")).unwrap();
    ingest_conllu(BufReader::new(file), &IngestOptions::default()).unwrap()
}

pub fn provider() -> FixtureProvider {
    FixtureProvider::from_dir(&fixtures().join("parses"), &IngestOptions::default()).unwrap()
}

pub fn engine() -> Engine {
    let index = IndexArtifact::from_corpus(&corpus());
    Engine::new(Arc::new(index), Arc::new(provider()))
}

/// `(sentence_id, [(capture, text)])` for every result, in stream order.
pub fn run(engine: &Engine, query: &str) -> Vec<(String, Vec<(String, String)>)> {
    let graph = engine.compile(query).unwrap_or_else(|e| panic!("{query}: {e}"));
    engine
        .stream(&graph)
        .map(|m| {
            let caps = m.captures.into_iter().map(|c| (c.name, c.text)).collect();
            (m.sentence_id, caps)
        })
        .collect()
}

pub fn ids(results: &[(String, Vec<(String, String)>)]) -> Vec<&str> {
    results.iter().map(|(id, _)| id.as_str()).collect()
}

pub mod oracle;
pub mod random;
