//! Candidate retrieval: a query graph becomes, per node, a conjunction of
//! feature requirements, each a disjunction of index keys.
//!
//! A node's requirements are intersected at token granularity, so the
//! sentence must contain one token having all of them. Nodes are then
//! intersected at sentence granularity. Regex clauses and unconstrained
//! nodes add nothing; the matcher checks them.

use std::collections::BTreeSet;

use crate::builder::QueryGraph;
use crate::constraint::{Property, ValueMatcher};

use super::{FeatureKind, IndexArtifact, Postings};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureKey {
    pub kind: FeatureKind,
    pub value: String,
}

impl FeatureKey {
    pub fn new(kind: FeatureKind, value: impl Into<String>) -> Self {
        FeatureKey {
            kind,
            value: value.into(),
        }
    }
}

/// Satisfied by a token carrying any of the keys.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Requirement {
    pub any_of: Vec<FeatureKey>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodePlan {
    pub node: usize,
    pub requirements: Vec<Requirement>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidatePlan {
    pub nodes: Vec<NodePlan>,
}

fn property_kind(p: Property) -> FeatureKind {
    match p {
        Property::Word => FeatureKind::Word,
        Property::Lemma => FeatureKind::Lemma,
        Property::Tag => FeatureKind::Tag,
        Property::Entity => FeatureKind::Entity,
    }
}

pub fn plan(graph: &QueryGraph) -> CandidatePlan {
    let mut per_node: Vec<BTreeSet<Requirement>> = vec![BTreeSet::new(); graph.nodes().len()];
    for node in graph.nodes() {
        for (property, matcher) in node.constraint.clauses() {
            if let ValueMatcher::Literals(values) = matcher {
                let kind = property_kind(property);
                per_node[node.id].insert(Requirement {
                    any_of: values.iter().map(|v| FeatureKey::new(kind, v.clone())).collect(),
                });
            }
        }
    }
    for e in graph.edges() {
        let out = FeatureKey::new(FeatureKind::OutLabel, e.label.clone());
        per_node[e.from].insert(Requirement { any_of: vec![out] });
        let inc = FeatureKey::new(FeatureKind::InLabel, e.label.clone());
        per_node[e.to].insert(Requirement { any_of: vec![inc] });
    }
    CandidatePlan {
        nodes: per_node
            .into_iter()
            .enumerate()
            .map(|(node, reqs)| NodePlan {
                node,
                requirements: reqs.into_iter().collect(),
            })
            .collect(),
    }
}

impl IndexArtifact {
    fn requirement_lists(&self, r: &Requirement) -> Vec<Postings<'_>> {
        r.any_of
            .iter()
            .map(|k| self.postings(k.kind, &k.value))
            .filter(|p| !p.is_empty())
            .collect()
    }

    /// Tokens satisfying every requirement, or `None` when there are none
    /// to check.
    fn node_tokens(&self, node: &NodePlan) -> Option<Vec<(u32, u32)>> {
        let mut reqs: Vec<(usize, Vec<Postings<'_>>)> = node
            .requirements
            .iter()
            .map(|r| {
                let lists = self.requirement_lists(r);
                (lists.iter().map(Postings::len).sum(), lists)
            })
            .collect();
        reqs.sort_by_key(|(cost, _)| *cost);
        let mut reqs = reqs.into_iter();
        let (_, first) = reqs.next()?;
        let mut current = union(&first);
        for (_, lists) in reqs {
            if current.is_empty() {
                break;
            }
            current = if lists.len() == 1 {
                intersect_sorted(&current, lists[0].iter())
            } else {
                intersect_sorted(&current, union(&lists).into_iter())
            };
        }
        Some(current)
    }

    /// Ordinals of sentences that may match, ascending. Every sentence
    /// with a match is included.
    pub fn candidates(&self, plan: &CandidatePlan) -> Vec<u32> {
        let mut lists: Vec<Vec<u32>> = Vec::new();
        for node in &plan.nodes {
            if let Some(tokens) = self.node_tokens(node) {
                let mut sentences: Vec<u32> = tokens.into_iter().map(|(s, _)| s).collect();
                sentences.dedup();
                if sentences.is_empty() {
                    return Vec::new();
                }
                lists.push(sentences);
            }
        }
        lists.sort_by_key(Vec::len);
        let mut lists = lists.into_iter();
        let Some(mut result) = lists.next() else {
            return (0..self.len() as u32).collect();
        };
        for other in lists {
            result = intersect_sorted(&result, other.into_iter());
            if result.is_empty() {
                break;
            }
        }
        result
    }
}

fn union(lists: &[Postings<'_>]) -> Vec<(u32, u32)> {
    match lists {
        [] => Vec::new(),
        [one] => one.iter().collect(),
        many => {
            let mut all: Vec<(u32, u32)> = many.iter().flat_map(|p| p.iter()).collect();
            all.sort_unstable();
            all.dedup();
            all
        }
    }
}

fn intersect_sorted<T: Ord + Copy>(small: &[T], large: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::with_capacity(small.len());
    let mut i = 0;
    for x in large {
        while i < small.len() && small[i] < x {
            i += 1;
        }
        if i == small.len() {
            break;
        }
        if small[i] == x {
            out.push(x);
            i += 1;
        }
    }
    out
}
