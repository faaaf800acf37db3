//! Seeded generators for corpora, query graphs and plain graphs.

use std::collections::BTreeSet;

use depsearch_core::builder::{NodeKind, QueryEdge, QueryGraph, QueryNode};
use depsearch_core::constraint::{FullRegex, Property, TokenConstraint, ValueMatcher};
use depsearch_core::corpus::{DepEdge, SentenceGraph, Span, Token};
use rand::seq::SliceRandom;
use rand::Rng;

pub const WORDS: [&str; 6] = ["ant", "bee", "cat", "dog", "eel", "fox"];
pub const LEMMAS: [&str; 4] = ["be", "go", "see", "run"];
pub const TAGS: [&str; 3] = ["NN", "VB", "JJ"];
pub const ENTITIES: [&str; 2] = ["PER", "ORG"];
pub const LABELS: [&str; 4] = ["nsubj", "dobj", "amod", "nmod"];

fn pick<R: Rng>(rng: &mut R, xs: &[&str]) -> String {
    xs.choose(rng).unwrap().to_string()
}

/// Marks random runs; returns the run covering each token.
fn runs<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Option<Span>> {
    let mut out = vec![None; n];
    let mut i = 0;
    while i < n {
        if rng.gen_bool(p) {
            let len = rng.gen_range(1..=3).min(n - i);
            for slot in &mut out[i..i + len] {
                *slot = Some(Span::new(i, i + len));
            }
            i += len;
        } else {
            i += 1;
        }
    }
    out
}

/// A connected graph over 1..=max_len tokens: a random tree plus a few
/// extra edges.
pub fn sentence<R: Rng>(rng: &mut R, id: &str, max_len: usize) -> SentenceGraph {
    let n = rng.gen_range(1..=max_len);
    let entity_runs = runs(rng, n, 0.2);
    let chunk_runs = runs(rng, n, 0.3);
    let mut entity_types = Vec::new();
    let mut tokens = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = Token::new(i, pick(rng, &WORDS), pick(rng, &LEMMAS), pick(rng, &TAGS));
        if let Some(span) = entity_runs[i] {
            if span.start == i {
                entity_types.push(pick(rng, &ENTITIES));
            }
            t.entity = entity_types.last().cloned();
            t.entity_span = Some(span);
        }
        t.chunk_span = chunk_runs[i];
        t.space_after = rng.gen_bool(0.9);
        tokens.push(t);
    }
    let mut edges: Vec<DepEdge> = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (h, d) = if rng.gen_bool(0.7) { (j, i) } else { (i, j) };
        edges.push(DepEdge::new(h, d, pick(rng, &LABELS)));
    }
    if n > 1 {
        for _ in 0..rng.gen_range(0..=2) {
            let h = rng.gen_range(0..n);
            let d = rng.gen_range(0..n);
            let e = DepEdge::new(h, d, pick(rng, &LABELS));
            if h != d && !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    SentenceGraph::new(id, tokens, edges).expect("generated sentence is valid")
}

pub fn corpus<R: Rng>(rng: &mut R, max_sentences: usize, max_len: usize) -> Vec<SentenceGraph> {
    let n = rng.gen_range(1..=max_sentences);
    (0..n).map(|i| sentence(rng, &format!("s{i}"), max_len)).collect()
}

fn matcher_for<R: Rng>(rng: &mut R, value: Option<&str>, pool: &[&str]) -> ValueMatcher {
    let value = value.map(str::to_owned).unwrap_or_else(|| pick(rng, pool));
    match rng.gen_range(0..5) {
        0 | 1 => ValueMatcher::literals([value]),
        2 => {
            let mut set: BTreeSet<String> = (0..rng.gen_range(0..3)).map(|_| pick(rng, pool)).collect();
            set.insert(value);
            ValueMatcher::Literals(set)
        }
        3 => ValueMatcher::literals([pick(rng, pool)]),
        _ => {
            let src = match rng.gen_range(0..3) {
                0 => regex::escape(&value),
                1 => format!("{}.*", regex::escape(&value[..1])),
                _ => "[A-Za-z]+".to_string(),
            };
            ValueMatcher::Regex(FullRegex::new(&src).unwrap())
        }
    }
}

fn constraint_for<R: Rng>(rng: &mut R, token: Option<&Token>) -> TokenConstraint {
    let mut c = TokenConstraint::any();
    for (p, pool) in [
        (Property::Word, &WORDS[..]),
        (Property::Lemma, &LEMMAS[..]),
        (Property::Tag, &TAGS[..]),
        (Property::Entity, &ENTITIES[..]),
    ] {
        if rng.gen_bool(0.3) {
            let value = token.and_then(|t| p.value_of(t));
            if token.is_some() && value.is_none() && rng.gen_bool(0.7) {
                continue;
            }
            c.insert(p, matcher_for(rng, value, pool));
        }
    }
    c
}

fn node<R: Rng>(rng: &mut R, id: usize, token: Option<&Token>) -> QueryNode {
    let named = rng.gen_bool(0.75);
    QueryNode {
        id,
        name: named.then(|| format!("n{id}")),
        constraint: constraint_for(rng, token),
        expand: named && rng.gen_bool(0.3),
        kind: if named { NodeKind::Capture } else { NodeKind::Connector },
        origin: id,
        origin_word: token.map(|t| t.word.clone()).unwrap_or_default(),
    }
}

fn spanning_subset(
    rng: &mut impl Rng,
    n: usize,
    edges: &[QueryEdge],
) -> Vec<QueryEdge> {
    // keep a random spanning tree, then each other edge with p = 0.5
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut keep = Vec::new();
    for i in order {
        let e = &edges[i];
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        if a != b {
            parent[a] = b;
            keep.push(e.clone());
        } else if rng.gen_bool(0.5) {
            keep.push(e.clone());
        }
    }
    keep
}

/// A query cut out of `s`: a connected set of its tokens with constraints
/// mostly derived from their values, so matches are common.
pub fn query_from<R: Rng>(rng: &mut R, s: &SentenceGraph, max_nodes: usize) -> QueryGraph {
    let adj = s.undirected_adjacency();
    let k = rng.gen_range(1..=max_nodes.min(s.len()));
    let mut chosen = vec![rng.gen_range(0..s.len())];
    while chosen.len() < k {
        let frontier: Vec<usize> = chosen
            .iter()
            .flat_map(|&v| adj[v].iter().copied())
            .filter(|u| !chosen.contains(u))
            .collect();
        match frontier.choose(rng) {
            Some(&u) => chosen.push(u),
            None => break,
        }
    }
    chosen.sort_unstable();
    let pos = |t: usize| chosen.iter().position(|&c| c == t);
    let nodes: Vec<QueryNode> = chosen
        .iter()
        .enumerate()
        .map(|(id, &t)| node(rng, id, Some(s.token(t))))
        .collect();
    let mut edges: Vec<QueryEdge> = s
        .edges()
        .iter()
        .filter_map(|e| Some(QueryEdge::new(pos(e.head)?, pos(e.dependent)?, e.label.clone())))
        .collect();
    edges = spanning_subset(rng, nodes.len(), &edges);
    if !edges.is_empty() && rng.gen_bool(0.1) {
        let i = rng.gen_range(0..edges.len());
        edges[i].label = pick(rng, &LABELS);
    }
    QueryGraph::new(nodes, edges).expect("connected by construction")
}

/// A query with no relation to any sentence.
pub fn random_query<R: Rng>(rng: &mut R, max_nodes: usize) -> QueryGraph {
    let k = rng.gen_range(1..=max_nodes);
    let nodes = (0..k).map(|id| node(rng, id, None)).collect();
    let mut edges = Vec::new();
    for i in 1..k {
        let j = rng.gen_range(0..i);
        let (a, b) = if rng.gen_bool(0.5) { (j, i) } else { (i, j) };
        edges.push(QueryEdge::new(a, b, pick(rng, &LABELS)));
    }
    QueryGraph::new(nodes, edges).unwrap()
}

pub fn any_query<R: Rng>(rng: &mut R, corpus: &[SentenceGraph], max_nodes: usize) -> QueryGraph {
    if rng.gen_bool(0.8) {
        let s = corpus.choose(rng).unwrap();
        query_from(rng, s, max_nodes)
    } else {
        random_query(rng, max_nodes)
    }
}

/// `g` with one more clause or one more edge.
pub fn tighten<R: Rng>(rng: &mut R, g: &QueryGraph) -> QueryGraph {
    let mut nodes = g.nodes().to_vec();
    let mut edges = g.edges().to_vec();
    let n = nodes.len();
    if n > 1 && rng.gen_bool(0.5) {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        edges.push(QueryEdge::new(a, b, pick(rng, &LABELS)));
    } else {
        let v = rng.gen_range(0..n);
        let free: Vec<Property> = [Property::Word, Property::Lemma, Property::Tag, Property::Entity]
            .into_iter()
            .filter(|p| nodes[v].constraint.get(*p).is_none())
            .collect();
        match free.choose(rng) {
            Some(&p) => {
                let pool: &[&str] = match p {
                    Property::Word => &WORDS,
                    Property::Lemma => &LEMMAS,
                    Property::Tag => &TAGS,
                    Property::Entity => &ENTITIES,
                };
                let m = matcher_for(rng, None, pool);
                nodes[v].constraint.insert(p, m);
            }
            None => {
                // every property is constrained already; narrow one literal set
                let (p, m) = nodes[v]
                    .constraint
                    .clauses()
                    .map(|(p, m)| (p, m.clone()))
                    .next()
                    .unwrap();
                let narrowed = match m {
                    ValueMatcher::Literals(set) if set.len() > 1 => {
                        ValueMatcher::Literals(set.into_iter().skip(1).collect())
                    }
                    other => other,
                };
                nodes[v].constraint.remove(p);
                nodes[v].constraint.insert(p, narrowed);
            }
        }
    }
    QueryGraph::new(nodes, edges).unwrap()
}

/// An undirected graph on 1..=max_n nodes; usually connected.
pub fn plain_graph<R: Rng>(rng: &mut R, max_n: usize) -> Vec<Vec<usize>> {
    let n = rng.gen_range(1..=max_n);
    let mut adj = vec![Vec::new(); n];
    let add = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    let connected = rng.gen_bool(0.9);
    for i in 1..n {
        if connected || rng.gen_bool(0.7) {
            let j = rng.gen_range(0..i);
            add(i, j, &mut adj);
        }
    }
    for _ in 0..rng.gen_range(0..=n) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        add(a, b, &mut adj);
    }
    adj
}

pub fn terminals<R: Rng>(rng: &mut R, n: usize, max: usize) -> BTreeSet<usize> {
    let k = rng.gen_range(1..=max.min(n));
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.into_iter().take(k).collect()
}
