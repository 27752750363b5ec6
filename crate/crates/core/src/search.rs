//! Range and k-nearest-neighbour queries.
//!
//! A subtree rooted at routing object `o` with covering radius `r` is
//! visited only if `d(q, o) <= radius + r`; otherwise the triangle
//! inequality rules out any answer inside it. Page reads go through an
//! [`IoLedger`] so a query's cost is its number of distinct pages.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::metric::Vector;
use crate::node::Entries;
use crate::page::{IoLedger, PageId};
use crate::tree::TreeCore;

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    /// Every object within `radius` (inclusive) of `center`.
    Range { center: Vector, radius: f64 },
    /// The `k` objects closest to `center`.
    Knn { center: Vector, k: usize },
}

impl Query {
    pub fn range(center: Vector, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::InvalidConfig(format!("query radius {radius} must be non-negative")));
        }
        Ok(Query::Range { center, radius })
    }

    pub fn knn(center: Vector, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        Ok(Query::Knn { center, k })
    }

    pub fn center(&self) -> &Vector {
        match self {
            Query::Range { center, .. } | Query::Knn { center, .. } => center,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub object_id: u64,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub page_ios: u64,
    pub distance_evals: u64,
}

#[derive(Clone, Debug, Default)]
pub struct QueryOutcome {
    /// Range hits in traversal order; kNN hits sorted by distance.
    pub hits: Vec<Hit>,
    pub stats: QueryStats,
}

impl QueryOutcome {
    pub fn ids(&self) -> Vec<u64> {
        self.hits.iter().map(|h| h.object_id).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.hits.iter().map(|h| h.distance).collect()
    }
}

/// Runs `query` against `tree`, charging page reads to `ledger`, which is
/// reset first.
pub fn run(tree: &TreeCore, query: &Query, ledger: &mut IoLedger) -> Result<QueryOutcome> {
    ledger.begin_query();
    let mut probe = Probe { tree, evals: 0 };
    let hits = match query {
        Query::Range { center, radius } => range(&mut probe, center, *radius, ledger)?,
        Query::Knn { center, k } => knn(&mut probe, center, *k, ledger)?,
    };
    Ok(QueryOutcome { hits, stats: QueryStats { page_ios: ledger.query_ios(), distance_evals: probe.evals } })
}

struct Probe<'a> {
    tree: &'a TreeCore,
    evals: u64,
}

impl Probe<'_> {
    fn dist(&mut self, a: &[f64], b: &[f64]) -> f64 {
        self.evals += 1;
        self.tree.dist(a, b)
    }
}

fn range(probe: &mut Probe, center: &[f64], radius: f64, ledger: &mut IoLedger) -> Result<Vec<Hit>> {
    let mut hits = Vec::new();
    let mut stack = vec![probe.tree.root];
    while let Some(page) = stack.pop() {
        match &probe.tree.store.read(page, ledger)?.entries {
            Entries::Leaf(entries) => {
                for e in entries {
                    let d = probe.dist(center, &e.vector);
                    if d <= radius {
                        hits.push(Hit { object_id: e.object_id, distance: d });
                    }
                }
            }
            Entries::Internal(entries) => {
                let first = stack.len();
                for e in entries {
                    if probe.dist(center, &e.routing_object) <= radius + e.covering_radius {
                        stack.push(e.child);
                    }
                }
                // Visit children in entry order.
                stack[first..].reverse();
            }
        }
    }
    Ok(hits)
}

/// Orders by `key`, then by `seq`; `f64::total_cmp` keeps it total.
#[derive(Debug)]
struct Keyed<T> {
    key: f64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Keyed<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Keyed<T> {}

impl<T> PartialOrd for Keyed<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Keyed<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.seq.cmp(&other.seq))
    }
}

/// Best-first search with a shrinking search radius: infinite until `k`
/// candidates are held, then the distance of the current k-th best.
/// Pending subtrees are expanded in order of their optimistic bound
/// `max(0, d(q, o) - r)`.
fn knn(probe: &mut Probe, center: &[f64], k: usize, ledger: &mut IoLedger) -> Result<Vec<Hit>> {
    // Max-heap: worst candidate on top. Later arrivals rank worse among
    // equal distances, so the first-encountered tie is kept.
    let mut best: BinaryHeap<Keyed<u64>> = BinaryHeap::with_capacity(k + 1);
    let mut pending: BinaryHeap<std::cmp::Reverse<Keyed<PageId>>> = BinaryHeap::new();
    let mut seq = 0u64;
    let radius = |best: &BinaryHeap<Keyed<u64>>| {
        if best.len() < k {
            f64::INFINITY
        } else {
            best.peek().map_or(f64::INFINITY, |w| w.key)
        }
    };

    pending.push(std::cmp::Reverse(Keyed { key: 0.0, seq, item: probe.tree.root }));
    while let Some(std::cmp::Reverse(next)) = pending.pop() {
        if next.key > radius(&best) {
            break;
        }
        match &probe.tree.store.read(next.item, ledger)?.entries {
            Entries::Leaf(entries) => {
                for e in entries {
                    let d = probe.dist(center, &e.vector);
                    seq += 1;
                    if best.len() < k {
                        best.push(Keyed { key: d, seq, item: e.object_id });
                    } else if d < radius(&best) {
                        best.pop();
                        best.push(Keyed { key: d, seq, item: e.object_id });
                    }
                }
            }
            Entries::Internal(entries) => {
                for e in entries {
                    let d = probe.dist(center, &e.routing_object);
                    if d <= radius(&best) + e.covering_radius {
                        seq += 1;
                        let bound = (d - e.covering_radius).max(0.0);
                        pending.push(std::cmp::Reverse(Keyed { key: bound, seq, item: e.child }));
                    }
                }
            }
        }
    }

    Ok(best
        .into_sorted_vec()
        .into_iter()
        .map(|c| Hit { object_id: c.item, distance: c.key })
        .collect())
}
