//! Reference implementations that share no code with the library paths
//! they check.

use std::collections::BTreeSet;

use depsearch_core::builder::QueryGraph;
use depsearch_core::constraint::{Property, ValueMatcher};
use depsearch_core::corpus::{SentenceGraph, Token};

fn property(t: &Token, p: Property) -> Option<&str> {
    match p {
        Property::Word => Some(&t.word),
        Property::Lemma => Some(&t.lemma),
        Property::Tag => Some(&t.tag),
        Property::Entity => t.entity.as_deref(),
    }
}

enum Check {
    Set(Vec<String>),
    Full(regex::Regex),
}

impl Check {
    fn accepts(&self, v: &str) -> bool {
        match self {
            Check::Set(xs) => xs.iter().any(|x| x == v),
            Check::Full(r) => r.is_match(v),
        }
    }
}

fn edge_in(s: &SentenceGraph, head: usize, dep: usize, label: &str) -> bool {
    s.edges()
        .iter()
        .any(|e| e.head == head && e.dependent == dep && e.label == label)
}

/// Brute-force matcher for one query graph.
pub struct Matcher<'g> {
    g: &'g QueryGraph,
    checks: Vec<Vec<(Property, Check)>>,
}

impl<'g> Matcher<'g> {
    pub fn new(g: &'g QueryGraph) -> Self {
        let checks = g
            .nodes()
            .iter()
            .map(|n| {
                n.constraint
                    .clauses()
                    .map(|(p, m)| {
                        let c = match m {
                            ValueMatcher::Literals(set) => Check::Set(set.iter().cloned().collect()),
                            ValueMatcher::Regex(r) => Check::Full(
                                regex::Regex::new(&format!("^(?:{})$", r.source())).unwrap(),
                            ),
                        };
                        (p, c)
                    })
                    .collect()
            })
            .collect();
        Matcher { g, checks }
    }

    fn token_ok(&self, node: usize, t: &Token) -> bool {
        self.checks[node]
            .iter()
            .all(|(p, c)| property(t, *p).is_some_and(|v| c.accepts(v)))
    }

    /// Every distinct named projection of every injective assignment,
    /// as `(name, token)` lists in node order.
    pub fn matches(&self, s: &SentenceGraph) -> BTreeSet<Vec<(String, usize)>> {
        let mut out = BTreeSet::new();
        let mut assign = vec![usize::MAX; self.g.nodes().len()];
        self.go(s, 0, &mut assign, &mut out);
        out
    }

    fn go(
        &self,
        s: &SentenceGraph,
        v: usize,
        assign: &mut Vec<usize>,
        out: &mut BTreeSet<Vec<(String, usize)>>,
    ) {
        let g = self.g;
        if v == assign.len() {
            let ok = g
                .edges()
                .iter()
                .all(|e| edge_in(s, assign[e.from], assign[e.to], &e.label));
            if ok {
                out.insert(
                    g.nodes()
                        .iter()
                        .filter_map(|q| q.name.clone().map(|name| (name, assign[q.id])))
                        .collect(),
                );
            }
            return;
        }
        for t in 0..s.len() {
            if assign[..v].contains(&t) || !self.token_ok(v, s.token(t)) {
                continue;
            }
            // edges whose endpoints are both assigned can be checked now
            let early_fail = g.edges().iter().any(|e| {
                (e.from == v && e.to < v && !edge_in(s, t, assign[e.to], &e.label))
                    || (e.to == v && e.from < v && !edge_in(s, assign[e.from], t, &e.label))
            });
            if early_fail {
                continue;
            }
            assign[v] = t;
            self.go(s, v + 1, assign, out);
        }
        assign[v] = usize::MAX;
    }
}

/// Smallest connected node set containing `terminals`, lexicographically
/// first among equals, by enumerating subsets in size then index order.
pub fn steiner(adj: &[Vec<usize>], terminals: &BTreeSet<usize>) -> Option<BTreeSet<usize>> {
    let n = adj.len();
    for k in terminals.len()..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let set: BTreeSet<usize> = combo.iter().copied().collect();
            if terminals.is_subset(&set) && connected(adj, &set) {
                return Some(set);
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    None
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn connected(adj: &[Vec<usize>], set: &BTreeSet<usize>) -> bool {
    let Some(&start) = set.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if set.contains(&u) && seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen.len() == set.len()
}
