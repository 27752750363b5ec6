//! Classic M-tree insertion, kept as the experimental baseline.
//!
//! Radii grow on the way down: when the chosen entry does not already cover
//! the new object, its radius is widened to exactly the object's distance.
//! This keeps every object inside every ancestor's region, but a radius can
//! end up smaller than the recurrence over its children, so it cannot be
//! recomputed locally and there is no delete.

use crate::error::Result;
use crate::metric::{DataObject, Vector};
use crate::node::{Entries, LeafEntry, RoutingEntry};
use crate::page::PageId;
use crate::tree::{TreeCore, TreeVariant};

#[derive(Clone, Copy, Debug, Default)]
pub struct Classic;

impl TreeVariant for Classic {
    fn name(&self) -> &'static str {
        "classic"
    }

    fn insert(&self, tree: &mut TreeCore, object: DataObject) -> Result<()> {
        let entry = LeafEntry { object_id: object.id, vector: object.vector, parent_distance: 0.0 };
        let root = tree.root;
        if let Some(promoted) = insert(tree, root, None, entry)? {
            tree.grow(promoted)?;
        }
        Ok(())
    }

    fn exact_radii(&self) -> bool {
        false
    }
}

fn insert(
    tree: &mut TreeCore,
    page: PageId,
    parent: Option<&Vector>,
    mut entry: LeafEntry,
) -> Result<Option<[RoutingEntry; 2]>> {
    let node = tree.load(page)?;
    let level = node.level;
    match node.entries {
        Entries::Leaf(mut entries) => {
            entry.parent_distance = tree.parent_distance(parent, &entry.vector);
            entries.push(entry);
            tree.write_or_split(page, level, entries)
        }
        Entries::Internal(mut entries) => {
            let distances: Vec<f64> = entries.iter().map(|e| tree.dist(&e.routing_object, &entry.vector)).collect();
            let best = choose_subtree(&entries, &distances);
            if distances[best] > entries[best].covering_radius {
                entries[best].covering_radius = distances[best];
            }
            let child = entries[best].child;
            let center = entries[best].routing_object.clone();
            match insert(tree, child, Some(&center), entry)? {
                None => {
                    tree.put(page, crate::node::Node::internal(level, entries))?;
                    Ok(None)
                }
                Some(promoted) => {
                    entries.remove(best);
                    for mut p in promoted {
                        p.parent_distance = tree.parent_distance(parent, &p.routing_object);
                        entries.push(p);
                    }
                    tree.write_or_split(page, level, entries)
                }
            }
        }
    }
}

/// Prefers the closest entry that already covers the object; failing that,
/// the entry needing the least radius expansion. Ties go to the lowest index.
pub(crate) fn choose_subtree(entries: &[RoutingEntry], distances: &[f64]) -> usize {
    let mut covering: Option<(usize, f64)> = None;
    let mut cheapest: Option<(usize, f64)> = None;
    for (i, (e, &d)) in entries.iter().zip(distances).enumerate() {
        if d <= e.covering_radius {
            if covering.is_none_or(|(_, best)| d < best) {
                covering = Some((i, d));
            }
        } else {
            let growth = d - e.covering_radius;
            if cheapest.is_none_or(|(_, best)| growth < best) {
                cheapest = Some((i, growth));
            }
        }
    }
    covering.or(cheapest).map(|(i, _)| i).expect("internal nodes are never empty")
}
