//! Node and entry data model shared by every tree variant, plus the
//! covering-radius formulas used when entries are promoted.

use crate::error::{Error, Result};
use crate::metric::{Metric, Vector};
use crate::page::PageId;

/// An indexed object as it sits in a leaf page.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafEntry {
    pub object_id: u64,
    pub vector: Vector,
    /// Distance to the routing object of the entry pointing at this leaf.
    /// Zero in a root leaf.
    pub parent_distance: f64,
}

/// A pointer to a subtree, centred on `routing_object`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingEntry {
    pub routing_object: Vector,
    pub covering_radius: f64,
    pub parent_distance: f64,
    pub child: PageId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Leaf,
    Internal,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Entries {
    Leaf(Vec<LeafEntry>),
    Internal(Vec<RoutingEntry>),
}

impl Entries {
    pub fn len(&self) -> usize {
        match self {
            Entries::Leaf(v) => v.len(),
            Entries::Internal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Entries::Leaf(_) => NodeKind::Leaf,
            Entries::Internal(_) => NodeKind::Internal,
        }
    }

    /// Covering radius implied by the stored parent distances:
    /// `max(parent_distance)` for leaf entries,
    /// `max(parent_distance + covering_radius)` for routing entries.
    /// Zero for an empty set.
    pub fn stored_radius(&self) -> f64 {
        match self {
            Entries::Leaf(v) => stored_radius(v),
            Entries::Internal(v) => stored_radius(v),
        }
    }

    /// Recomputes every parent distance against `center`, or zeroes them for a root.
    pub fn reparent(&mut self, metric: &dyn Metric, center: Option<&Vector>) {
        match self {
            Entries::Leaf(v) => reparent(v, metric, center),
            Entries::Internal(v) => reparent(v, metric, center),
        }
    }
}

/// A page-sized node. Level 0 holds leaf entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub level: u32,
    pub entries: Entries,
}

impl Node {
    pub fn empty(kind: NodeKind, level: u32) -> Self {
        let entries = match kind {
            NodeKind::Leaf => Entries::Leaf(Vec::new()),
            NodeKind::Internal => Entries::Internal(Vec::new()),
        };
        Self { level, entries }
    }

    pub fn leaf(entries: Vec<LeafEntry>) -> Self {
        Self { level: 0, entries: Entries::Leaf(entries) }
    }

    pub fn internal(level: u32, entries: Vec<RoutingEntry>) -> Self {
        Self { level, entries: Entries::Internal(entries) }
    }

    pub fn kind(&self) -> NodeKind {
        self.entries.kind()
    }

    pub fn is_leaf(&self) -> bool {
        self.kind() == NodeKind::Leaf
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Behaviour common to both entry kinds, letting split and merge code be
/// written once.
pub trait Entry: Clone {
    const KIND: NodeKind;

    fn vector(&self) -> &Vector;

    /// How far the entry's region extends beyond its own object:
    /// zero for a leaf entry, the covering radius for a routing entry.
    fn reach(&self) -> f64;

    fn parent_distance(&self) -> f64;

    fn set_parent_distance(&mut self, d: f64);

    fn wrap(entries: Vec<Self>) -> Entries;
}

impl Entry for LeafEntry {
    const KIND: NodeKind = NodeKind::Leaf;

    fn vector(&self) -> &Vector {
        &self.vector
    }

    fn reach(&self) -> f64 {
        0.0
    }

    fn parent_distance(&self) -> f64 {
        self.parent_distance
    }

    fn set_parent_distance(&mut self, d: f64) {
        self.parent_distance = d;
    }

    fn wrap(entries: Vec<Self>) -> Entries {
        Entries::Leaf(entries)
    }
}

impl Entry for RoutingEntry {
    const KIND: NodeKind = NodeKind::Internal;

    fn vector(&self) -> &Vector {
        &self.routing_object
    }

    fn reach(&self) -> f64 {
        self.covering_radius
    }

    fn parent_distance(&self) -> f64 {
        self.parent_distance
    }

    fn set_parent_distance(&mut self, d: f64) {
        self.parent_distance = d;
    }

    fn wrap(entries: Vec<Self>) -> Entries {
        Entries::Internal(entries)
    }
}

/// `max(parent_distance + reach)` over `entries`; zero when empty.
pub(crate) fn stored_radius<E: Entry>(entries: &[E]) -> f64 {
    entries.iter().map(|e| e.parent_distance() + e.reach()).fold(0.0, f64::max)
}

pub(crate) fn reparent<E: Entry>(entries: &mut [E], metric: &dyn Metric, center: Option<&Vector>) {
    for e in entries {
        let d = center.map_or(0.0, |c| metric.distance(c, e.vector()));
        e.set_parent_distance(d);
    }
}

/// Covering radius of a routing object promoted over a set of leaf entries:
/// the largest distance from `center` to any entry.
pub fn radius_over_leaf_entries(metric: &dyn Metric, center: &[f64], entries: &[LeafEntry]) -> Result<f64> {
    radius_over(metric, center, entries)
}

/// Covering radius of a routing object promoted over a set of routing
/// entries: the largest `d(center, e) + r(e)`.
pub fn radius_over_routing_entries(
    metric: &dyn Metric,
    center: &[f64],
    entries: &[RoutingEntry],
) -> Result<f64> {
    radius_over(metric, center, entries)
}

pub(crate) fn radius_over<E: Entry>(metric: &dyn Metric, center: &[f64], entries: &[E]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(entries
        .iter()
        .map(|e| metric.distance(center, e.vector()) + e.reach())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Chebyshev;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn leaf(id: u64, v: Vec<f64>) -> LeafEntry {
        LeafEntry { object_id: id, vector: v.into(), parent_distance: 0.0 }
    }

    fn routing(v: Vec<f64>, r: f64) -> RoutingEntry {
        RoutingEntry { routing_object: v.into(), covering_radius: r, parent_distance: 0.0, child: PageId(0) }
    }

    #[test]
    fn leaf_radius_examples() {
        let m = Chebyshev::new(1);
        assert_eq!(radius_over_leaf_entries(&m, &[3.0], &[leaf(0, vec![3.0])]).unwrap(), 0.0);
        let set = [leaf(0, vec![1.0]), leaf(1, vec![5.0]), leaf(2, vec![3.0])];
        assert_eq!(radius_over_leaf_entries(&m, &[0.0], &set).unwrap(), 5.0);
        assert!(matches!(radius_over_leaf_entries(&m, &[0.0], &[]), Err(Error::EmptySet)));
    }

    #[test]
    fn routing_radius_examples() {
        let m = Chebyshev::new(1);
        let set = [routing(vec![2.0], 1.0), routing(vec![1.0], 4.0)];
        assert_eq!(radius_over_routing_entries(&m, &[0.0], &set).unwrap(), 5.0);
        assert_eq!(radius_over_routing_entries(&m, &[7.0], &[routing(vec![7.0], 3.0)]).unwrap(), 3.0);
        assert!(radius_over_routing_entries(&m, &[0.0], &[]).is_err());
    }

    #[test]
    fn radius_formulas_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Chebyshev::new(20);
        for _ in 0..50 {
            let center: Vec<f64> = (0..20).map(|_| rng.random()).collect();
            let n = rng.random_range(1..30);
            let leaves: Vec<LeafEntry> =
                (0..n).map(|i| leaf(i, (0..20).map(|_| rng.random()).collect())).collect();
            let routes: Vec<RoutingEntry> = (0..n)
                .map(|_| routing((0..20).map(|_| rng.random()).collect(), rng.random()))
                .collect();

            let mut want_leaf = 0.0f64;
            for e in &leaves {
                let d = center.iter().zip(e.vector.iter()).fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
                want_leaf = want_leaf.max(d);
            }
            let mut want_route = 0.0f64;
            for e in &routes {
                let d = center.iter().zip(e.routing_object.iter()).fold(0.0f64, |d, (a, b)| d.max((a - b).abs()));
                want_route = want_route.max(d + e.covering_radius);
            }
            assert_eq!(radius_over_leaf_entries(&m, &center, &leaves).unwrap(), want_leaf);
            assert_eq!(radius_over_routing_entries(&m, &center, &routes).unwrap(), want_route);
        }
    }

    #[test]
    fn stored_radius_uses_parent_distances() {
        let mut r = vec![routing(vec![0.0], 1.0), routing(vec![0.0], 4.0)];
        r[0].parent_distance = 2.0;
        r[1].parent_distance = 1.0;
        assert_eq!(Entries::Internal(r).stored_radius(), 5.0);
        assert_eq!(Entries::Leaf(vec![]).stored_radius(), 0.0);
    }
}
