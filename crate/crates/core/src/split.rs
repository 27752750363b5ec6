//! Node split policies.
//!
//! [`MinMax`] tries every unordered pair of entries as the two promoted
//! routing objects, partitions the remaining entries by generalized
//! hyperplane (nearest promoted object), repairs minimum fill, and keeps the
//! pair whose larger covering radius is smallest.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{Metric, Vector};
use crate::node::{Entry, LeafEntry, RoutingEntry};

/// One half of a split: its promoted routing object, covering radius, and
/// entries with parent distances set relative to the routing object.
#[derive(Clone, Debug)]
pub struct SplitSide<E> {
    pub routing_object: Vector,
    pub covering_radius: f64,
    pub entries: Vec<E>,
}

#[derive(Clone, Debug)]
pub struct SplitResult<E> {
    pub left: SplitSide<E>,
    pub right: SplitSide<E>,
}

pub trait SplitPolicy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Partitions `entries` into two sides of at least `min_fill` entries
    /// each (capped at half the input).
    fn split_leaf(
        &self,
        metric: &dyn Metric,
        entries: Vec<LeafEntry>,
        min_fill: usize,
    ) -> Result<SplitResult<LeafEntry>>;

    fn split_internal(
        &self,
        metric: &dyn Metric,
        entries: Vec<RoutingEntry>,
        min_fill: usize,
    ) -> Result<SplitResult<RoutingEntry>>;
}

/// Dispatches to the entry-kind specific method of a policy.
pub(crate) trait SplitEntry: Entry + Sized {
    fn split_with(
        policy: &dyn SplitPolicy,
        metric: &dyn Metric,
        entries: Vec<Self>,
        min_fill: usize,
    ) -> Result<SplitResult<Self>>;
}

impl SplitEntry for LeafEntry {
    fn split_with(
        policy: &dyn SplitPolicy,
        metric: &dyn Metric,
        entries: Vec<Self>,
        min_fill: usize,
    ) -> Result<SplitResult<Self>> {
        policy.split_leaf(metric, entries, min_fill)
    }
}

impl SplitEntry for RoutingEntry {
    fn split_with(
        policy: &dyn SplitPolicy,
        metric: &dyn Metric,
        entries: Vec<Self>,
        min_fill: usize,
    ) -> Result<SplitResult<Self>> {
        policy.split_internal(metric, entries, min_fill)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MinMax;

impl SplitPolicy for MinMax {
    fn name(&self) -> &'static str {
        "minmax"
    }

    fn split_leaf(
        &self,
        metric: &dyn Metric,
        entries: Vec<LeafEntry>,
        min_fill: usize,
    ) -> Result<SplitResult<LeafEntry>> {
        min_max_split(metric, entries, min_fill)
    }

    fn split_internal(
        &self,
        metric: &dyn Metric,
        entries: Vec<RoutingEntry>,
        min_fill: usize,
    ) -> Result<SplitResult<RoutingEntry>> {
        min_max_split(metric, entries, min_fill)
    }
}

type PolicyCtor = fn() -> Arc<dyn SplitPolicy>;

const POLICIES: &[(&str, PolicyCtor)] = &[("minmax", || Arc::new(MinMax))];

pub fn names() -> impl Iterator<Item = &'static str> {
    POLICIES.iter().map(|(name, _)| *name)
}

pub fn by_name(name: &str) -> Result<Arc<dyn SplitPolicy>> {
    POLICIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor())
        .ok_or_else(|| Error::UnknownStrategy { kind: "split policy", name: name.to_owned() })
}

struct Candidate {
    max_radius: f64,
    radius_sum: f64,
    pair: (usize, usize),
    left: Vec<bool>,
}

fn min_max_split<E: Entry>(metric: &dyn Metric, entries: Vec<E>, min_fill: usize) -> Result<SplitResult<E>> {
    let n = entries.len();
    if n < 2 {
        return Err(Error::SplitTooSmall(n));
    }
    let min_fill = min_fill.clamp(1, n / 2);

    let mut dist = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let d = metric.distance(entries[a].vector(), entries[b].vector());
            dist[a * n + b] = d;
            dist[b * n + a] = d;
        }
    }
    let d = |a: usize, b: usize| dist[a * n + b];

    let mut best: Option<Candidate> = None;
    let mut left = vec![false; n];
    let mut movable = Vec::with_capacity(n);
    for i in 0..n {
        for j in i + 1..n {
            let (mut n_left, mut n_right) = (1, 1);
            for (k, slot) in left.iter_mut().enumerate() {
                let goes_left = if k == i {
                    true
                } else if k == j {
                    false
                } else {
                    let (di, dj) = (d(i, k), d(j, k));
                    di < dj || (di == dj && n_left <= n_right)
                };
                *slot = goes_left;
                if k != i && k != j {
                    if goes_left {
                        n_left += 1;
                    } else {
                        n_right += 1;
                    }
                }
            }

            // Move the entries closest to the hyperplane until both sides
            // reach minimum fill.
            if n_left < min_fill || n_right < min_fill {
                let to_left = n_left < min_fill;
                movable.clear();
                movable.extend((0..n).filter(|&k| k != i && k != j && left[k] != to_left));
                movable.sort_by(|&a, &b| {
                    let margin = |k: usize| (d(i, k) - d(j, k)).abs();
                    margin(a).total_cmp(&margin(b)).then(a.cmp(&b))
                });
                let deficit = min_fill - if to_left { n_left } else { n_right };
                for &k in movable.iter().take(deficit) {
                    left[k] = to_left;
                }
            }

            let mut r_left = 0.0f64;
            let mut r_right = 0.0f64;
            for k in 0..n {
                if left[k] {
                    r_left = r_left.max(d(i, k) + entries[k].reach());
                } else {
                    r_right = r_right.max(d(j, k) + entries[k].reach());
                }
            }
            let max_radius = r_left.max(r_right);
            let radius_sum = r_left + r_right;
            let better = match &best {
                None => true,
                Some(b) => {
                    max_radius < b.max_radius || (max_radius == b.max_radius && radius_sum < b.radius_sum)
                }
            };
            if better {
                best = Some(Candidate { max_radius, radius_sum, pair: (i, j), left: left.clone() });
            }
        }
    }

    let best = best.expect("at least one pair exists");
    let (i, j) = best.pair;
    let left_object = entries[i].vector().clone();
    let right_object = entries[j].vector().clone();
    let mut left_side = SplitSide { routing_object: left_object, covering_radius: 0.0, entries: Vec::new() };
    let mut right_side = SplitSide { routing_object: right_object, covering_radius: 0.0, entries: Vec::new() };
    for (k, mut e) in entries.into_iter().enumerate() {
        let (side, center) = if best.left[k] { (&mut left_side, i) } else { (&mut right_side, j) };
        let pd = d(center, k);
        side.covering_radius = side.covering_radius.max(pd + e.reach());
        e.set_parent_distance(pd);
        side.entries.push(e);
    }
    Ok(SplitResult { left: left_side, right: right_side })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Chebyshev;
    use crate::page::PageId;
    use proptest::prelude::*;

    fn leaves(xs: &[f64]) -> Vec<LeafEntry> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| LeafEntry { object_id: i as u64, vector: vec![x].into(), parent_distance: 0.0 })
            .collect()
    }

    fn ids(side: &SplitSide<LeafEntry>) -> Vec<u64> {
        side.entries.iter().map(|e| e.object_id).collect()
    }

    #[test]
    fn two_entries_split_apart() {
        let m = Chebyshev::new(1);
        let r = MinMax.split_leaf(&m, leaves(&[0.0, 5.0]), 1).unwrap();
        assert_eq!(ids(&r.left), vec![0]);
        assert_eq!(ids(&r.right), vec![1]);
        assert_eq!(r.left.covering_radius, 0.0);
        assert_eq!(r.right.covering_radius, 0.0);
    }

    #[test]
    fn too_few_entries() {
        let m = Chebyshev::new(1);
        assert!(matches!(MinMax.split_leaf(&m, leaves(&[1.0]), 1), Err(Error::SplitTooSmall(1))));
    }

    /// Exhaustive reference: every pair, plain nearest-object partition,
    /// max radius per side.
    fn brute_force_pairs(xs: &[f64]) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                let (mut rl, mut rr) = (0.0f64, 0.0f64);
                for &x in xs {
                    let (a, b) = ((x - xs[i]).abs(), (x - xs[j]).abs());
                    if a <= b {
                        rl = rl.max(a);
                    } else {
                        rr = rr.max(b);
                    }
                }
                out.push(((i, j), rl.max(rr)));
            }
        }
        out
    }

    #[test]
    fn picks_unique_min_max_pair() {
        let xs = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0];
        let all = brute_force_pairs(&xs);
        assert_eq!(all.len(), 15);
        let best = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let winners: Vec<_> = all.iter().filter(|p| p.1 == best).collect();
        assert_eq!(winners.len(), 1);
        assert_eq!(winners[0].0, (1, 4));
        assert_eq!(best, 1.0);

        let m = Chebyshev::new(1);
        let r = MinMax.split_leaf(&m, leaves(&xs), 3).unwrap();
        assert_eq!(&*r.left.routing_object, &[1.0]);
        assert_eq!(&*r.right.routing_object, &[11.0]);
        assert_eq!(ids(&r.left), vec![0, 1, 2]);
        assert_eq!(ids(&r.right), vec![3, 4, 5]);
        assert_eq!((r.left.covering_radius, r.right.covering_radius), (1.0, 1.0));
    }

    #[test]
    fn repairs_min_fill() {
        // One outlier would otherwise be promoted alone.
        let xs = [0.0, 0.1, 0.2, 0.3, 0.4, 100.0];
        let m = Chebyshev::new(1);
        let r = MinMax.split_leaf(&m, leaves(&xs), 3).unwrap();
        assert_eq!(r.left.entries.len(), 3);
        assert_eq!(r.right.entries.len(), 3);
    }

    #[test]
    fn internal_radius_includes_child_radius() {
        let m = Chebyshev::new(1);
        let entries: Vec<RoutingEntry> = [(0.0, 2.0), (1.0, 0.5), (10.0, 1.0), (11.0, 3.0)]
            .iter()
            .enumerate()
            .map(|(c, &(x, r))| RoutingEntry {
                routing_object: vec![x].into(),
                covering_radius: r,
                parent_distance: 0.0,
                child: PageId(c as u64),
            })
            .collect();
        let r = MinMax.split_internal(&m, entries, 2).unwrap();
        for side in [&r.left, &r.right] {
            let want = side
                .entries
                .iter()
                .map(|e| (e.routing_object[0] - side.routing_object[0]).abs() + e.covering_radius)
                .fold(0.0, f64::max);
            assert_eq!(side.covering_radius, want);
        }
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(by_name("minmax").unwrap().name(), "minmax");
        assert!(by_name("random").is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_and_meets_fill(
            pts in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 2..40),
            min_fill in 1usize..12,
        ) {
            let m = Chebyshev::new(3);
            let entries: Vec<LeafEntry> = pts
                .into_iter()
                .enumerate()
                .map(|(i, c)| LeafEntry { object_id: i as u64, vector: c.into(), parent_distance: 0.0 })
                .collect();
            let n = entries.len();
            let r = MinMax.split_leaf(&m, entries, min_fill).unwrap();
            let want_min = min_fill.clamp(1, n / 2);
            prop_assert!(r.left.entries.len() >= want_min);
            prop_assert!(r.right.entries.len() >= want_min);
            let mut all: Vec<u64> = ids(&r.left).into_iter().chain(ids(&r.right)).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n as u64).collect::<Vec<_>>());
            for side in [&r.left, &r.right] {
                let mut want = 0.0f64;
                for e in &side.entries {
                    let d = m.distance(&side.routing_object, &e.vector);
                    prop_assert_eq!(e.parent_distance, d);
                    want = want.max(d);
                }
                prop_assert_eq!(side.covering_radius, want);
            }
        }
    }
}
