//! The tree handle, its shared core state, and the variant registry.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::classic::Classic;
use crate::error::{Error, Result};
use crate::metric::{self, CountingMetric, DataObject, Metric, Vector};
use crate::node::{Entries, Node, NodeKind, RoutingEntry};
use crate::page::{IoLedger, PageConfig, PageId, PageStore, StoreMeta};
use crate::search::{self, Query, QueryOutcome};
use crate::split::{self, SplitEntry, SplitPolicy};
use crate::stats::{self, TreeStats};
use crate::symmetric::Symmetric;
use crate::verify::{self, VerifyReport};

/// Maintenance behaviour of one tree flavour: how inserts descend and how
/// covering radii are kept, and whether deletion is possible.
pub trait TreeVariant: Send + Sync + fmt::Debug {
    /// Registry name, also written into store files.
    fn name(&self) -> &'static str;

    fn insert(&self, tree: &mut TreeCore, object: DataObject) -> Result<()>;

    /// Removes one instance of `object`; returns whether it was present.
    fn delete(&self, tree: &mut TreeCore, object: &DataObject) -> Result<bool> {
        let _ = (tree, object);
        Err(Error::Unsupported { variant: self.name(), op: "delete" })
    }

    /// True when every covering radius equals the recurrence over its
    /// immediate children.
    fn exact_radii(&self) -> bool;
}

type VariantCtor = fn() -> Arc<dyn TreeVariant>;

const VARIANTS: &[(&str, VariantCtor)] = &[("sm", || Arc::new(Symmetric)), ("classic", || Arc::new(Classic))];

/// Names accepted by [`variant_by_name`].
pub fn variant_names() -> impl Iterator<Item = &'static str> {
    VARIANTS.iter().map(|(name, _)| *name)
}

pub fn variant_by_name(name: &str) -> Result<Arc<dyn TreeVariant>> {
    VARIANTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor())
        .ok_or_else(|| Error::UnknownStrategy { kind: "tree variant", name: name.to_owned() })
}

/// Everything needed to create an empty tree.
#[derive(Clone, Debug)]
pub struct TreeConfig {
    pub page: PageConfig,
    pub active_dims: usize,
    pub metric: String,
    pub variant: String,
    pub split: String,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            page: PageConfig::default(),
            active_dims: crate::page::DEFAULT_STORAGE_DIMS,
            metric: "linf".into(),
            variant: "sm".into(),
            split: "minmax".into(),
        }
    }
}

impl TreeConfig {
    pub fn with_variant(mut self, variant: &str) -> Self {
        self.variant = variant.to_owned();
        self
    }

    pub fn with_active_dims(mut self, dims: usize) -> Self {
        self.active_dims = dims;
        self
    }

    pub fn with_page(mut self, page: PageConfig) -> Self {
        self.page = page;
        self
    }
}

/// Tree state shared by all variants. Variants mutate it through the
/// crate-internal helpers, which record every page they touch so that
/// per-operation node visits can be measured.
#[derive(Debug)]
pub struct TreeCore {
    pub(crate) store: PageStore,
    pub(crate) root: PageId,
    pub(crate) height: u32,
    pub(crate) metric: CountingMetric,
    pub(crate) split: Arc<dyn SplitPolicy>,
    pub(crate) len: usize,
    pub(crate) visits: IoLedger,
}

impl TreeCore {
    fn empty(page: PageConfig, metric: Arc<dyn Metric>, split: Arc<dyn SplitPolicy>) -> Result<Self> {
        let mut store = PageStore::new(page);
        let root = store.allocate(NodeKind::Leaf, 0)?;
        Ok(Self { store, root, height: 0, metric: CountingMetric::new(metric), split, len: 0, visits: IoLedger::new() })
    }

    pub fn store(&self) -> &PageStore {
        &self.store
    }

    pub fn root(&self) -> PageId {
        self.root
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn metric(&self) -> &dyn Metric {
        &self.metric
    }

    pub fn config(&self) -> &PageConfig {
        self.store.config()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub(crate) fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.metric.distance(a, b)
    }

    pub(crate) fn check_dims(&self, v: &Vector) -> Result<()> {
        let expected = self.config().storage_dims();
        if v.dims() != expected {
            return Err(Error::DimensionMismatch { expected, got: v.dims() });
        }
        Ok(())
    }

    pub(crate) fn begin_mutation(&mut self) {
        self.visits.begin_query();
    }

    pub(crate) fn load(&mut self, page: PageId) -> Result<Node> {
        let node = self.store.read(page, &mut self.visits)?.clone();
        Ok(node)
    }

    pub(crate) fn put(&mut self, page: PageId, node: Node) -> Result<()> {
        self.visits.record(page);
        self.store.write(page, node)
    }

    pub(crate) fn free(&mut self, page: PageId) -> Result<()> {
        self.store.free(page)
    }

    /// Distance from `v` to `parent`, or zero at the root.
    pub(crate) fn parent_distance(&self, parent: Option<&Vector>, v: &[f64]) -> f64 {
        parent.map_or(0.0, |p| self.dist(p, v))
    }

    /// Splits an overflowing entry set. The left half is written to `page`,
    /// the right half to `right` (or a fresh page). Returns the two promoted
    /// routing entries with parent distances still unset.
    pub(crate) fn promote<E: SplitEntry>(
        &mut self,
        page: PageId,
        right: Option<PageId>,
        level: u32,
        entries: Vec<E>,
    ) -> Result<[RoutingEntry; 2]> {
        let min_fill = self.config().min_fill(E::KIND);
        let split = E::split_with(self.split.as_ref(), &self.metric, entries, min_fill)?;
        let right_page = match right {
            Some(p) => p,
            None => self.store.allocate(E::KIND, level)?,
        };
        self.put(page, Node { level, entries: E::wrap(split.left.entries) })?;
        self.put(right_page, Node { level, entries: E::wrap(split.right.entries) })?;
        Ok([
            RoutingEntry {
                routing_object: split.left.routing_object,
                covering_radius: split.left.covering_radius,
                parent_distance: 0.0,
                child: page,
            },
            RoutingEntry {
                routing_object: split.right.routing_object,
                covering_radius: split.right.covering_radius,
                parent_distance: 0.0,
                child: right_page,
            },
        ])
    }

    /// Writes `entries` to `page` if they fit, otherwise splits them.
    /// Returns `Ok(None)` when written in place.
    pub(crate) fn write_or_split<E: SplitEntry>(
        &mut self,
        page: PageId,
        level: u32,
        entries: Vec<E>,
    ) -> Result<Option<[RoutingEntry; 2]>> {
        if entries.len() <= self.config().capacity(E::KIND) {
            self.put(page, Node { level, entries: E::wrap(entries) })?;
            Ok(None)
        } else {
            self.promote(page, None, level, entries).map(Some)
        }
    }

    /// Installs a new root above the two halves of a split old root.
    pub(crate) fn grow(&mut self, promoted: [RoutingEntry; 2]) -> Result<()> {
        let level = self.height + 1;
        let root = self.store.allocate(NodeKind::Internal, level)?;
        self.put(root, Node::internal(level, promoted.into()))?;
        self.root = root;
        self.height = level;
        Ok(())
    }

    /// Replaces an internal root holding a single entry by that entry's
    /// child, repeatedly.
    pub(crate) fn collapse_root(&mut self) -> Result<()> {
        loop {
            let node = self.store.get(self.root)?;
            let child = match &node.entries {
                Entries::Internal(v) if v.len() == 1 => v[0].child,
                _ => return Ok(()),
            };
            self.free(self.root)?;
            let mut new_root = self.load(child)?;
            new_root.entries.reparent(&self.metric, None);
            self.put(child, new_root)?;
            self.root = child;
            self.height -= 1;
        }
    }
}

/// A metric tree over paged storage, maintained by a runtime-selected
/// [`TreeVariant`].
#[derive(Debug)]
pub struct Tree {
    core: TreeCore,
    variant: Arc<dyn TreeVariant>,
}

impl Tree {
    pub fn new(config: TreeConfig) -> Result<Self> {
        let variant = variant_by_name(&config.variant)?;
        if config.active_dims == 0 || config.active_dims > config.page.storage_dims() {
            return Err(Error::InvalidConfig(format!(
                "active dimensions {} outside 1..={}",
                config.active_dims,
                config.page.storage_dims()
            )));
        }
        let metric = metric::by_name(&config.metric, config.active_dims)?;
        let split = split::by_name(&config.split)?;
        Ok(Self { core: TreeCore::empty(config.page, metric, split)?, variant })
    }

    /// Symmetric M-tree over default 4 kB pages and 20-dimensional storage.
    pub fn symmetric(active_dims: usize) -> Result<Self> {
        Self::new(TreeConfig::default().with_active_dims(active_dims))
    }

    /// Classic M-tree over default 4 kB pages and 20-dimensional storage.
    pub fn classic(active_dims: usize) -> Result<Self> {
        Self::new(TreeConfig::default().with_variant("classic").with_active_dims(active_dims))
    }

    pub fn core(&self) -> &TreeCore {
        &self.core
    }

    pub fn variant(&self) -> &dyn TreeVariant {
        self.variant.as_ref()
    }

    pub fn height(&self) -> u32 {
        self.core.height
    }

    pub fn len(&self) -> usize {
        self.core.len
    }

    pub fn is_empty(&self) -> bool {
        self.core.len == 0
    }

    pub fn root(&self) -> PageId {
        self.core.root
    }

    pub fn store(&self) -> &PageStore {
        &self.core.store
    }

    pub fn metric(&self) -> &dyn Metric {
        self.core.metric()
    }

    /// Total metric evaluations since creation or the last reset.
    pub fn distance_count(&self) -> u64 {
        self.core.metric.counter().get()
    }

    pub fn reset_distance_count(&self) {
        self.core.metric.counter().reset();
    }

    /// Distinct pages read or written by the most recent insert or delete.
    pub fn last_mutation_visits(&self) -> u64 {
        self.core.visits.query_ios()
    }

    pub fn insert(&mut self, object: DataObject) -> Result<()> {
        self.core.check_dims(&object.vector)?;
        self.core.begin_mutation();
        self.variant.insert(&mut self.core, object)?;
        self.core.len += 1;
        Ok(())
    }

    pub fn delete(&mut self, object: &DataObject) -> Result<bool> {
        self.core.check_dims(&object.vector)?;
        self.core.begin_mutation();
        let found = self.variant.delete(&mut self.core, object)?;
        if found {
            self.core.len -= 1;
        }
        Ok(found)
    }

    pub fn search(&self, query: &Query) -> Result<QueryOutcome> {
        self.core.check_dims(query.center())?;
        let mut ledger = IoLedger::new();
        search::run(&self.core, query, &mut ledger)
    }

    pub fn range_query(&self, center: &Vector, radius: f64) -> Result<QueryOutcome> {
        self.search(&Query::range(center.clone(), radius)?)
    }

    pub fn knn_query(&self, center: &Vector, k: usize) -> Result<QueryOutcome> {
        self.search(&Query::knn(center.clone(), k)?)
    }

    /// Runs the structural invariant suite.
    pub fn verify(&self) -> VerifyReport {
        verify::verify(&self.core)
    }

    pub fn stats(&self) -> TreeStats {
        stats::collect(&self.core)
    }

    /// Every stored object, in leaf order.
    pub fn objects(&self) -> Vec<DataObject> {
        let mut out = Vec::with_capacity(self.core.len);
        let mut stack = vec![self.core.root];
        while let Some(page) = stack.pop() {
            match &self.core.store.get(page).expect("live page").entries {
                Entries::Leaf(v) => {
                    out.extend(v.iter().map(|e| DataObject { id: e.object_id, vector: e.vector.clone() }))
                }
                Entries::Internal(v) => stack.extend(v.iter().rev().map(|e| e.child)),
            }
        }
        out
    }

    pub fn meta(&self) -> StoreMeta {
        StoreMeta {
            variant: self.variant.name().to_owned(),
            metric: self.core.metric.name().to_owned(),
            active_dims: self.core.metric.active_dims(),
            root: self.core.root,
            height: self.core.height,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.core.store.persist(path, &self.meta())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (store, meta) = PageStore::load(path)?;
        Self::from_store(store, meta)
    }

    /// Reassembles a tree around an existing page store. The split policy is
    /// not persisted; MinMax is assumed.
    pub fn from_store(store: PageStore, meta: StoreMeta) -> Result<Self> {
        let variant = variant_by_name(&meta.variant)?;
        let metric = metric::by_name(&meta.metric, meta.active_dims)?;
        if store.get(meta.root)?.level != meta.height {
            return Err(Error::InvalidConfig(format!("root {} is not at level {}", meta.root, meta.height)));
        }
        let mut core = TreeCore {
            store,
            root: meta.root,
            height: meta.height,
            metric: CountingMetric::new(metric),
            split: split::by_name("minmax")?,
            len: 0,
            visits: IoLedger::new(),
        };
        core.len = core
            .store
            .page_ids()
            .filter_map(|p| match &core.store.get(p).ok()?.entries {
                Entries::Leaf(v) => Some(v.len()),
                Entries::Internal(_) => None,
            })
            .sum();
        Ok(Self { core, variant })
    }

    #[cfg(test)]
    pub(crate) fn core_mut(&mut self) -> &mut TreeCore {
        &mut self.core
    }
}
