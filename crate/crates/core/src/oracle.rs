//! Brute-force ground truth. Nothing here walks the tree through the search
//! or maintenance code paths; the subtree walk reads pages directly.

use crate::error::Result;
use crate::metric::{DataObject, Metric};
use crate::node::{Entries, RoutingEntry};
use crate::page::PageStore;

/// Ids of every object within `radius` (inclusive) of `center`, sorted.
pub fn scan_range(objects: &[DataObject], metric: &dyn Metric, center: &[f64], radius: f64) -> Vec<u64> {
    let mut ids: Vec<u64> = objects
        .iter()
        .filter(|o| metric.distance(center, &o.vector) <= radius)
        .map(|o| o.id)
        .collect();
    ids.sort_unstable();
    ids
}

/// The `k` smallest distances from `center`, ascending.
pub fn scan_knn(objects: &[DataObject], metric: &dyn Metric, center: &[f64], k: usize) -> Vec<f64> {
    let mut d: Vec<f64> = objects.iter().map(|o| metric.distance(center, &o.vector)).collect();
    d.sort_by(f64::total_cmp);
    d.truncate(k);
    d
}

/// The tightest covering radius `entry` could have: the largest distance
/// from its routing object to any object stored beneath it.
pub fn exact_covering_radius(store: &PageStore, metric: &dyn Metric, entry: &RoutingEntry) -> Result<f64> {
    let mut max = 0.0f64;
    let mut stack = vec![entry.child];
    while let Some(page) = stack.pop() {
        match &store.get(page)?.entries {
            Entries::Leaf(v) => {
                for e in v {
                    max = max.max(metric.distance(&entry.routing_object, &e.vector));
                }
            }
            Entries::Internal(v) => stack.extend(v.iter().map(|e| e.child)),
        }
    }
    Ok(max)
}
