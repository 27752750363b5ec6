//! Symmetric M-tree maintenance.
//!
//! Covering radii are never widened on the way down. Each recursive call
//! instead returns the exact radius of the subtree it handled (the maximum
//! of its entries' parent distances, plus their radii above the leaves), so
//! every routing entry always equals the recurrence over its immediate
//! children. Because of that, deletion can shrink radii on the way back up
//! and underflowing nodes can be merged into a sibling, each in O(h).

use crate::error::Result;
use crate::metric::{DataObject, Metric, Vector};
use crate::node::{stored_radius, Entries, LeafEntry, Node, RoutingEntry};
use crate::page::PageId;
use crate::split::SplitEntry;
use crate::tree::{TreeCore, TreeVariant};

#[derive(Clone, Copy, Debug, Default)]
pub struct Symmetric;

impl TreeVariant for Symmetric {
    fn name(&self) -> &'static str {
        "sm"
    }

    fn insert(&self, tree: &mut TreeCore, object: DataObject) -> Result<()> {
        let entry = LeafEntry { object_id: object.id, vector: object.vector, parent_distance: 0.0 };
        let root = tree.root;
        if let Ascent::Split(promoted) = insert(tree, root, None, entry)? {
            tree.grow(promoted)?;
        }
        Ok(())
    }

    fn delete(&self, tree: &mut TreeCore, object: &DataObject) -> Result<bool> {
        let root = tree.root;
        let found = match delete(tree, root, None, true, object)? {
            Removal::NotFound => false,
            Removal::Radius(_) => true,
            Removal::Underflow(_) => unreachable!("the root never reports underflow"),
        };
        if found {
            tree.collapse_root()?;
        }
        Ok(found)
    }

    fn exact_radii(&self) -> bool {
        true
    }
}

/// What an insert hands back to the level above.
#[derive(Debug)]
enum Ascent {
    /// The subtree's exact covering radius.
    Radius(f64),
    /// The subtree split; both halves replace the descended entry.
    Split([RoutingEntry; 2]),
}

fn insert(tree: &mut TreeCore, page: PageId, parent: Option<&Vector>, mut entry: LeafEntry) -> Result<Ascent> {
    let node = tree.load(page)?;
    let level = node.level;
    match node.entries {
        Entries::Leaf(mut entries) => {
            entry.parent_distance = tree.parent_distance(parent, &entry.vector);
            entries.push(entry);
            settle(tree, page, level, entries)
        }
        Entries::Internal(mut entries) => {
            let best = closest(tree, &entries, &entry.vector);
            let child = entries[best].child;
            let center = entries[best].routing_object.clone();
            match insert(tree, child, Some(&center), entry)? {
                Ascent::Radius(r) => {
                    // A split further down can tighten the subtree, so the
                    // returned radius replaces the stored one outright.
                    entries[best].covering_radius = r;
                    let radius = stored_radius(&entries);
                    tree.put(page, Node::internal(level, entries))?;
                    Ok(Ascent::Radius(radius))
                }
                Ascent::Split(promoted) => {
                    entries.remove(best);
                    for mut p in promoted {
                        p.parent_distance = tree.parent_distance(parent, &p.routing_object);
                        entries.push(p);
                    }
                    settle(tree, page, level, entries)
                }
            }
        }
    }
}

/// Index of the routing entry whose object is closest to `v`; ties go to
/// the lowest index.
fn closest(tree: &TreeCore, entries: &[RoutingEntry], v: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, e) in entries.iter().enumerate() {
        let d = tree.dist(&e.routing_object, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn settle<E: SplitEntry>(tree: &mut TreeCore, page: PageId, level: u32, entries: Vec<E>) -> Result<Ascent> {
    let radius = stored_radius(&entries);
    match tree.write_or_split(page, level, entries)? {
        None => Ok(Ascent::Radius(radius)),
        Some(promoted) => Ok(Ascent::Split(promoted)),
    }
}

/// What a delete hands back to the level above.
#[derive(Debug)]
enum Removal {
    NotFound,
    /// Found and removed; the subtree's exact covering radius.
    Radius(f64),
    /// Found and removed, leaving the node underflown. Its page is no longer
    /// written; the caller merges these entries elsewhere and frees it.
    Underflow(Entries),
}

fn delete(
    tree: &mut TreeCore,
    page: PageId,
    parent: Option<&Vector>,
    is_root: bool,
    target: &DataObject,
) -> Result<Removal> {
    // Scan by reference; only the node that changes is cloned.
    let node = tree.store.get(page)?;
    tree.visits.record(page);
    let level = node.level;
    let branches: Vec<(f64, usize, PageId, Vector)> = match &node.entries {
        Entries::Leaf(entries) => {
            let Some(pos) = entries.iter().position(|e| e.object_id == target.id && e.vector == target.vector)
            else {
                return Ok(Removal::NotFound);
            };
            let mut entries = entries.clone();
            entries.remove(pos);
            return finish(tree, page, level, is_root, Entries::Leaf(entries));
        }
        // A zero-radius range descent, nearest branch first.
        Entries::Internal(entries) => entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                let d = tree.metric.distance(&target.vector, &e.routing_object);
                (d <= e.covering_radius).then(|| (d, i, e.child, e.routing_object.clone()))
            })
            .collect(),
    };
    let mut branches = branches;
    branches.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    for (_, i, child, center) in branches {
        let outcome = delete(tree, child, Some(&center), false, target)?;
        if let Removal::NotFound = outcome {
            continue;
        }
        let Entries::Internal(mut entries) = tree.store.get(page)?.entries.clone() else {
            unreachable!("page kind is fixed");
        };
        match outcome {
            Removal::NotFound => unreachable!(),
            // Assigned outright so the radius can contract.
            Removal::Radius(r) => entries[i].covering_radius = r,
            Removal::Underflow(orphans) => merge_orphans(tree, &mut entries, i, orphans, parent, level - 1)?,
        }
        return finish(tree, page, level, is_root, Entries::Internal(entries));
    }
    Ok(Removal::NotFound)
}

fn finish(tree: &mut TreeCore, page: PageId, level: u32, is_root: bool, entries: Entries) -> Result<Removal> {
    if !is_root && entries.len() < tree.config().min_fill(entries.kind()) {
        return Ok(Removal::Underflow(entries));
    }
    let radius = entries.stored_radius();
    tree.put(page, Node { level, entries })?;
    Ok(Removal::Radius(radius))
}

/// Moves the entries of the underflown child of `entries[under]` into the
/// child of its nearest sibling entry, splitting the union when it does not
/// fit one page.
fn merge_orphans(
    tree: &mut TreeCore,
    entries: &mut Vec<RoutingEntry>,
    under: usize,
    orphans: Entries,
    parent: Option<&Vector>,
    child_level: u32,
) -> Result<()> {
    let under_page = entries[under].child;
    if entries.len() == 1 {
        // Only an internal root can get here; its sole child is put back as
        // is and becomes the root once the delete unwinds.
        entries[under].covering_radius = orphans.stored_radius();
        tree.put(under_page, Node { level: child_level, entries: orphans })?;
        return Ok(());
    }

    let origin = entries[under].routing_object.clone();
    let mut nearest = (usize::MAX, f64::INFINITY);
    for (i, e) in entries.iter().enumerate() {
        if i == under {
            continue;
        }
        let d = tree.dist(&origin, &e.routing_object);
        if d < nearest.1 {
            nearest = (i, d);
        }
    }
    let sibling = nearest.0;
    let sibling_node = tree.load(entries[sibling].child)?;
    match (sibling_node.entries, orphans) {
        (Entries::Leaf(s), Entries::Leaf(p)) => absorb(tree, entries, under, sibling, s, p, parent, child_level),
        (Entries::Internal(s), Entries::Internal(p)) => {
            absorb(tree, entries, under, sibling, s, p, parent, child_level)
        }
        _ => unreachable!("sibling nodes share a level and therefore a kind"),
    }
}

#[allow(clippy::too_many_arguments)]
fn absorb<E: SplitEntry>(
    tree: &mut TreeCore,
    entries: &mut Vec<RoutingEntry>,
    under: usize,
    sibling: usize,
    mut merged: Vec<E>,
    orphans: Vec<E>,
    parent: Option<&Vector>,
    child_level: u32,
) -> Result<()> {
    let under_page = entries[under].child;
    let sibling_page = entries[sibling].child;

    if merged.len() + orphans.len() <= tree.config().capacity(E::KIND) {
        let center = entries[sibling].routing_object.clone();
        for mut e in orphans {
            e.set_parent_distance(tree.dist(e.vector(), &center));
            merged.push(e);
        }
        entries[sibling].covering_radius = stored_radius(&merged);
        tree.put(sibling_page, Node { level: child_level, entries: E::wrap(merged) })?;
        tree.free(under_page)?;
        entries.remove(under);
        return Ok(());
    }

    merged.extend(orphans);
    let promoted = tree.promote(sibling_page, Some(under_page), child_level, merged)?;
    let (hi, lo) = if under > sibling { (under, sibling) } else { (sibling, under) };
    entries.remove(hi);
    entries.remove(lo);
    for mut p in promoted {
        p.parent_distance = tree.parent_distance(parent, &p.routing_object);
        entries.push(p);
    }
    Ok(())
}
