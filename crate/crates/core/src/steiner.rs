//! Exact minimum-node Steiner sets (Dreyfus-Wagner).
//!
//! Every node gets weight `2^n - 2^(n-1-i)`. Any set of `k` nodes then
//! weighs more than every set of `k-1` nodes, and among sets of equal size
//! the lighter one is the lexicographically smaller sorted index list. The
//! weights of distinct sets differ, so the optimum is unique and the
//! tie-break needs no extra pass.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::ops::{Add, Sub};

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SteinerError {
    #[error("no terminals given")]
    NoTerminals,
    #[error("terminal {0} is not a node of the graph")]
    OutOfRange(usize),
    #[error("terminals are not connected to each other")]
    Disconnected,
}

trait Weight: Clone + Ord + Add<Output = Self> + Sub<Output = Self> {
    fn node_weight(n: usize, i: usize) -> Self;
}

impl Weight for u128 {
    fn node_weight(n: usize, i: usize) -> Self {
        (1u128 << n) - (1u128 << (n - 1 - i))
    }
}

impl Weight for BigUint {
    fn node_weight(n: usize, i: usize) -> Self {
        (BigUint::from(1u8) << n) - (BigUint::from(1u8) << (n - 1 - i))
    }
}

/// Largest graph handled with `u128` weights.
const U128_LIMIT: usize = 120;

/// Smallest node set containing `terminals` whose induced subgraph is
/// connected; ties go to the lexicographically smallest sorted set.
///
/// `adjacency` is an undirected adjacency list.
pub fn minimum_steiner_nodes(
    adjacency: &[Vec<usize>],
    terminals: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, SteinerError> {
    let n = adjacency.len();
    if terminals.is_empty() {
        return Err(SteinerError::NoTerminals);
    }
    if let Some(&t) = terminals.iter().find(|&&t| t >= n) {
        return Err(SteinerError::OutOfRange(t));
    }
    if terminals.len() == 1 {
        return Ok(terminals.clone());
    }
    if n <= U128_LIMIT {
        solve::<u128>(adjacency, terminals)
    } else {
        solve::<BigUint>(adjacency, terminals)
    }
}

#[derive(Clone, Copy)]
enum Choice {
    Unset,
    Terminal,
    Merge(usize),
    From(usize),
}

fn solve<W: Weight>(
    adjacency: &[Vec<usize>],
    terminals: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, SteinerError> {
    let n = adjacency.len();
    let terms: Vec<usize> = terminals.iter().copied().collect();
    let k = terms.len();
    let full = (1usize << k) - 1;
    let weight: Vec<W> = (0..n).map(|i| W::node_weight(n, i)).collect();

    // best[mask][v]: lightest tree spanning terminals(mask) plus v,
    // counting every node in it.
    let mut best: Vec<Vec<Option<W>>> = vec![vec![None; n]; full + 1];
    let mut choice: Vec<Vec<Choice>> = vec![vec![Choice::Unset; n]; full + 1];

    for (i, &t) in terms.iter().enumerate() {
        let mask = 1 << i;
        best[mask][t] = Some(weight[t].clone());
        choice[mask][t] = Choice::Terminal;
        relax(adjacency, &weight, &mut best[mask], &mut choice[mask]);
    }

    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        for v in 0..n {
            // enumerate splits with the lowest terminal on the left only
            let low = mask & mask.wrapping_neg();
            let mut sub = (mask - 1) & mask;
            while sub > 0 {
                if sub & low != 0 {
                    if let (Some(a), Some(b)) = (&best[sub][v], &best[mask ^ sub][v]) {
                        let total = a.clone() + b.clone() - weight[v].clone();
                        if best[mask][v].as_ref().is_none_or(|cur| total < *cur) {
                            best[mask][v] = Some(total);
                            choice[mask][v] = Choice::Merge(sub);
                        }
                    }
                }
                sub = (sub - 1) & mask;
            }
        }
        let (row, crow) = (&mut best[mask], &mut choice[mask]);
        relax(adjacency, &weight, row, crow);
    }

    if best[full][terms[0]].is_none() {
        return Err(SteinerError::Disconnected);
    }
    let mut nodes = BTreeSet::new();
    collect(&choice, full, terms[0], &mut nodes);
    Ok(nodes)
}

/// Dijkstra over node weights, seeded with the current row.
fn relax<W: Weight>(
    adjacency: &[Vec<usize>],
    weight: &[W],
    row: &mut [Option<W>],
    choice: &mut [Choice],
) {
    let mut heap = BinaryHeap::new();
    for (v, cost) in row.iter().enumerate() {
        if let Some(c) = cost {
            heap.push(Reverse((c.clone(), v)));
        }
    }
    while let Some(Reverse((cost, v))) = heap.pop() {
        if row[v].as_ref() != Some(&cost) {
            continue;
        }
        for &u in &adjacency[v] {
            let next = cost.clone() + weight[u].clone();
            if row[u].as_ref().is_none_or(|cur| next < *cur) {
                row[u] = Some(next.clone());
                choice[u] = Choice::From(v);
                heap.push(Reverse((next, u)));
            }
        }
    }
}

fn collect(choice: &[Vec<Choice>], mask: usize, v: usize, out: &mut BTreeSet<usize>) {
    let mut v = v;
    loop {
        out.insert(v);
        match choice[mask][v] {
            Choice::Terminal => return,
            Choice::From(u) => v = u,
            Choice::Merge(sub) => {
                collect(choice, sub, v, out);
                collect(choice, mask ^ sub, v, out);
                return;
            }
            Choice::Unset => unreachable!("traceback reached an unset state"),
        }
    }
}
