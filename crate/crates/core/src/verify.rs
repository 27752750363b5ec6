//! Structural invariant checker.
//!
//! Every check recomputes from scratch: distances are re-evaluated rather
//! than trusted from stored parent distances, and containment is checked
//! against a full subtree walk.

use std::collections::HashSet;
use std::fmt;

use crate::metric::Vector;
use crate::node::{radius_over_leaf_entries, radius_over_routing_entries, Entries};
use crate::oracle;
use crate::page::PageId;
use crate::tree::TreeCore;

/// Relative tolerance for radius and parent-distance comparisons.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;
/// Absolute slack for containment checks.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// Stored radius differs from the recurrence over immediate children.
    RadiusExactness,
    /// Some object lies outside an ancestor's covering radius.
    Containment,
    ParentDistance,
    Balance,
    /// Non-root node below minimum fill, or an internal root with one entry.
    Occupancy,
    Capacity,
    /// Dangling, shared or leaked pages, or a wrong object count.
    Structure,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub kind: ViolationKind,
    pub page: PageId,
    /// Entry indices from the root down to the offending node.
    pub path: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {} (path {:?}): {}", self.kind, self.page, self.path, self.detail)
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub violations: Vec<Violation>,
    /// Largest `|stored - recurrence| / recurrence` over all routing entries.
    pub max_radius_residual: f64,
    pub routing_entries: usize,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// True when every violation is of one of the `allowed` kinds.
    pub fn is_clean_except(&self, allowed: &[ViolationKind]) -> bool {
        self.violations.iter().all(|v| allowed.contains(&v.kind))
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in self.violations.iter().take(20) {
            writeln!(f, "  {v}")?;
        }
        if self.violations.len() > 20 {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RELATIVE_TOLERANCE * a.abs().max(b.abs())
}

fn residual(stored: f64, exact: f64) -> f64 {
    let diff = (stored - exact).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / exact.abs().max(stored.abs())
    }
}

struct Walker<'a> {
    tree: &'a TreeCore,
    report: VerifyReport,
    seen: HashSet<PageId>,
    objects: usize,
}

impl Walker<'_> {
    fn flag(&mut self, kind: ViolationKind, page: PageId, path: &[usize], detail: String) {
        self.report.violations.push(Violation { kind, page, path: path.to_vec(), detail });
    }

    fn visit(&mut self, page: PageId, level: u32, parent: Option<&Vector>, path: &mut Vec<usize>) {
        use ViolationKind::*;
        if !self.seen.insert(page) {
            self.flag(Structure, page, path, "page referenced more than once".into());
            return;
        }
        let tree = self.tree;
        let node = match tree.store.get(page) {
            Ok(n) => n,
            Err(e) => {
                self.flag(Structure, page, path, e.to_string());
                return;
            }
        };
        let config = tree.config();
        let is_root = parent.is_none();

        if node.level != level {
            self.flag(Balance, page, path, format!("level {} where {level} expected", node.level));
        }
        if node.is_leaf() != (level == 0) {
            self.flag(Balance, page, path, format!("{:?} node at level {level}", node.kind()));
        }
        let capacity = config.capacity(node.kind());
        if node.len() > capacity {
            self.flag(Capacity, page, path, format!("{} entries, capacity {capacity}", node.len()));
        }
        let min = config.min_fill(node.kind());
        if !is_root && node.len() < min {
            self.flag(Occupancy, page, path, format!("{} entries, minimum {min}", node.len()));
        }
        if is_root && !node.is_leaf() && node.len() < 2 {
            self.flag(Occupancy, page, path, format!("internal root with {} entries", node.len()));
        }

        let check_pd = |this: &mut Self, i: usize, v: &Vector, stored: f64, path: &mut Vec<usize>| {
            let want = parent.map_or(0.0, |p| tree.metric.inner().distance(p, v));
            if !close(stored, want) {
                path.push(i);
                this.flag(ParentDistance, page, path, format!("stored {stored}, recomputed {want}"));
                path.pop();
            }
        };

        match &node.entries {
            Entries::Leaf(entries) => {
                self.objects += entries.len();
                for (i, e) in entries.iter().enumerate() {
                    check_pd(self, i, &e.vector, e.parent_distance, path);
                }
            }
            Entries::Internal(entries) => {
                for (i, e) in entries.iter().enumerate() {
                    check_pd(self, i, &e.routing_object, e.parent_distance, path);
                    path.push(i);
                    self.report.routing_entries += 1;
                    let metric = tree.metric.inner().as_ref();
                    let recurrence = match tree.store.get(e.child).map(|c| &c.entries) {
                        Ok(Entries::Leaf(c)) if !c.is_empty() => {
                            radius_over_leaf_entries(metric, &e.routing_object, c).ok()
                        }
                        Ok(Entries::Internal(c)) if !c.is_empty() => {
                            radius_over_routing_entries(metric, &e.routing_object, c).ok()
                        }
                        _ => None,
                    };
                    if let Some(want) = recurrence {
                        let r = residual(e.covering_radius, want);
                        self.report.max_radius_residual = self.report.max_radius_residual.max(r);
                        if !close(e.covering_radius, want) {
                            self.flag(
                                RadiusExactness,
                                page,
                                path,
                                format!("stored {}, recurrence {want}", e.covering_radius),
                            );
                        }
                    }
                    if let Ok(exact) = oracle::exact_covering_radius(&tree.store, metric, e) {
                        if exact > e.covering_radius + CONTAINMENT_SLACK {
                            self.flag(
                                Containment,
                                page,
                                path,
                                format!("object at {exact} beyond radius {}", e.covering_radius),
                            );
                        }
                    }
                    if level > 0 {
                        self.visit(e.child, level - 1, Some(&e.routing_object), path);
                    }
                    path.pop();
                }
            }
        }
    }
}

/// Checks radius exactness, containment, parent distances, balance,
/// capacity, occupancy and page accounting. Radius exactness is checked for
/// every variant; callers decide whether it applies.
pub fn verify(tree: &TreeCore) -> VerifyReport {
    let mut w = Walker { tree, report: VerifyReport::default(), seen: HashSet::new(), objects: 0 };
    if tree.store.get(tree.root).ok().map(|n| n.level) != Some(tree.height) {
        w.flag(ViolationKind::Balance, tree.root, &[], format!("root is not at level {}", tree.height));
    }
    w.visit(tree.root, tree.height, None, &mut Vec::new());
    let live = tree.store.live_pages();
    if w.seen.len() != live {
        let detail = format!("{} reachable pages, {live} live", w.seen.len());
        w.flag(ViolationKind::Structure, tree.root, &[], detail);
    }
    if w.objects != tree.len {
        let detail = format!("{} objects stored, {} expected", w.objects, tree.len);
        w.flag(ViolationKind::Structure, tree.root, &[], detail);
    }
    w.report
}
