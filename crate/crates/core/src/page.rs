//! Fixed-size page storage, the per-query IO ledger, and the store file format.
//!
//! Nodes live in memory as decoded [`Node`] values; the byte layout below is
//! what bounds their capacity and what [`PageStore::persist`] writes.
//!
//! Page layout (little-endian, exactly `page_bytes` long, zero padded):
//!
//! | bytes | field                                     |
//! |-------|-------------------------------------------|
//! | 0     | kind: 0 leaf, 1 internal, 2 free          |
//! | 1     | reserved                                  |
//! | 2..4  | level (u16)                               |
//! | 4..8  | entry count (u32)                         |
//! | 8..16 | reserved                                  |
//! | 16..  | entries                                   |
//!
//! A leaf entry is `dims` f64 coordinates, the object id (u64) and the
//! parent distance (f64). A routing entry is `dims` coordinates, the child
//! page id (u64), the covering radius (f64) and the parent distance (f64).

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metric::Vector;
use crate::node::{Entries, LeafEntry, Node, NodeKind, RoutingEntry};

pub const PAGE_HEADER_BYTES: usize = 16;
pub const DEFAULT_PAGE_BYTES: usize = 4096;
pub const DEFAULT_STORAGE_DIMS: usize = 20;
pub const DEFAULT_UNDERFLOW_FRACTION: f64 = 0.4;

const STORE_MAGIC: &[u8; 8] = b"SMTREE\x00\x01";
const STORE_VERSION: u32 = 1;
const NAME_BYTES: usize = 16;
const STORE_HEADER_BYTES: usize = 72;
const STORE_TRAILER_BYTES: usize = 16;

const KIND_LEAF: u8 = 0;
const KIND_INTERNAL: u8 = 1;
const KIND_FREE: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageId(pub u64);

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "page {}", self.0)
    }
}

/// Page geometry and the fill limits derived from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PageConfig {
    page_bytes: usize,
    storage_dims: usize,
    underflow_fraction: f64,
    leaf_capacity: usize,
    internal_capacity: usize,
}

impl Default for PageConfig {
    fn default() -> Self {
        Self::new(DEFAULT_PAGE_BYTES, DEFAULT_STORAGE_DIMS, DEFAULT_UNDERFLOW_FRACTION)
            .expect("default page configuration is valid")
    }
}

impl PageConfig {
    pub fn new(page_bytes: usize, storage_dims: usize, underflow_fraction: f64) -> Result<Self> {
        if storage_dims == 0 {
            return Err(Error::InvalidConfig("storage dimension must be positive".into()));
        }
        if !(underflow_fraction > 0.0 && underflow_fraction <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "underflow fraction {underflow_fraction} outside (0, 0.5]"
            )));
        }
        let body = page_bytes.saturating_sub(PAGE_HEADER_BYTES);
        let leaf_capacity = body / leaf_entry_bytes(storage_dims);
        let internal_capacity = body / routing_entry_bytes(storage_dims);
        if leaf_capacity < 4 || internal_capacity < 4 {
            return Err(Error::InvalidConfig(format!(
                "{page_bytes}-byte pages hold {leaf_capacity} leaf / {internal_capacity} routing \
                 entries at {storage_dims} dims; at least 4 of each are required"
            )));
        }
        Ok(Self { page_bytes, storage_dims, underflow_fraction, leaf_capacity, internal_capacity })
    }

    /// Smallest page that fits `capacity` routing entries (and therefore at
    /// least as many leaf entries).
    pub fn for_capacity(capacity: usize, storage_dims: usize, underflow_fraction: f64) -> Result<Self> {
        Self::new(
            PAGE_HEADER_BYTES + capacity * routing_entry_bytes(storage_dims),
            storage_dims,
            underflow_fraction,
        )
    }

    pub fn page_bytes(&self) -> usize {
        self.page_bytes
    }

    pub fn storage_dims(&self) -> usize {
        self.storage_dims
    }

    pub fn underflow_fraction(&self) -> f64 {
        self.underflow_fraction
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn internal_capacity(&self) -> usize {
        self.internal_capacity
    }

    pub fn capacity(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Leaf => self.leaf_capacity,
            NodeKind::Internal => self.internal_capacity,
        }
    }

    pub fn min_leaf_fill(&self) -> usize {
        min_fill(self.underflow_fraction, self.leaf_capacity)
    }

    pub fn min_internal_fill(&self) -> usize {
        min_fill(self.underflow_fraction, self.internal_capacity)
    }

    pub fn min_fill(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Leaf => self.min_leaf_fill(),
            NodeKind::Internal => self.min_internal_fill(),
        }
    }

    pub fn entry_bytes(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Leaf => leaf_entry_bytes(self.storage_dims),
            NodeKind::Internal => routing_entry_bytes(self.storage_dims),
        }
    }

    /// Bytes a node with `count` entries of `kind` occupies.
    pub fn node_bytes(&self, kind: NodeKind, count: usize) -> usize {
        PAGE_HEADER_BYTES + count * self.entry_bytes(kind)
    }
}

fn min_fill(fraction: f64, capacity: usize) -> usize {
    // The small epsilon keeps e.g. 0.4 * 10 from rounding up to 5.
    ((fraction * capacity as f64) - 1e-9).ceil().max(1.0) as usize
}

fn leaf_entry_bytes(dims: usize) -> usize {
    dims * 8 + 8 + 8
}

fn routing_entry_bytes(dims: usize) -> usize {
    dims * 8 + 8 + 8 + 8
}

/// Distinct pages touched per query, modelling a cold, unbounded buffer
/// pool: a page costs one IO the first time a query reads it and nothing
/// afterwards.
#[derive(Clone, Debug, Default)]
pub struct IoLedger {
    touched: HashSet<PageId>,
    total: u64,
}

impl IoLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empties the buffer for a new query; the running total is kept.
    pub fn begin_query(&mut self) {
        self.touched.clear();
    }

    /// Records a page access; returns true when it cost an IO.
    pub fn record(&mut self, page: PageId) -> bool {
        let fresh = self.touched.insert(page);
        if fresh {
            self.total += 1;
        }
        fresh
    }

    /// IOs charged to the current query.
    pub fn query_ios(&self) -> u64 {
        self.touched.len() as u64
    }

    /// IOs charged across every query since the ledger was created.
    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Tree metadata that travels with a persisted store.
#[derive(Clone, Debug, PartialEq)]
pub struct StoreMeta {
    pub variant: String,
    pub metric: String,
    pub active_dims: usize,
    pub root: PageId,
    pub height: u32,
}

/// In-memory page array. Page ids are handed out in increasing order and a
/// freed id is never handed out again.
#[derive(Clone, Debug)]
pub struct PageStore {
    config: PageConfig,
    pages: Vec<Option<Node>>,
    live: usize,
    page_limit: Option<usize>,
}

impl PageStore {
    pub fn new(config: PageConfig) -> Self {
        Self { config, pages: Vec::new(), live: 0, page_limit: None }
    }

    /// Caps the number of ids the store will ever allocate.
    pub fn with_page_limit(mut self, limit: usize) -> Self {
        self.page_limit = Some(limit);
        self
    }

    pub fn config(&self) -> &PageConfig {
        &self.config
    }

    /// Number of live (allocated, not freed) pages.
    pub fn live_pages(&self) -> usize {
        self.live
    }

    /// Number of ids ever allocated, live or freed.
    pub fn allocated_ids(&self) -> usize {
        self.pages.len()
    }

    pub fn allocate(&mut self, kind: NodeKind, level: u32) -> Result<PageId> {
        if let Some(limit) = self.page_limit {
            if self.pages.len() >= limit {
                return Err(Error::StoreExhausted { limit });
            }
        }
        let id = PageId(self.pages.len() as u64);
        self.pages.push(Some(Node::empty(kind, level)));
        self.live += 1;
        Ok(id)
    }

    pub fn free(&mut self, page: PageId) -> Result<()> {
        let slot = self.slot_mut(page)?;
        *slot = None;
        self.live -= 1;
        Ok(())
    }

    /// Reads a page, charging it to `ledger`.
    pub fn read(&self, page: PageId, ledger: &mut IoLedger) -> Result<&Node> {
        let node = self.get(page)?;
        ledger.record(page);
        Ok(node)
    }

    /// Reads a page without IO accounting. For verification and oracles.
    pub fn get(&self, page: PageId) -> Result<&Node> {
        self.pages
            .get(page.0 as usize)
            .and_then(Option::as_ref)
            .ok_or(Error::UnknownPage(page))
    }

    pub fn write(&mut self, page: PageId, node: Node) -> Result<()> {
        let bytes = self.config.node_bytes(node.kind(), node.len());
        if bytes > self.config.page_bytes {
            return Err(Error::PageOverflow { page, bytes, limit: self.config.page_bytes });
        }
        let dims = self.config.storage_dims;
        let bad_dims = match &node.entries {
            Entries::Leaf(v) => v.iter().map(|e| e.vector.dims()).find(|&d| d != dims),
            Entries::Internal(v) => v.iter().map(|e| e.routing_object.dims()).find(|&d| d != dims),
        };
        if let Some(got) = bad_dims {
            return Err(Error::DimensionMismatch { expected: dims, got });
        }
        *self.slot_mut(page)? = Some(node);
        Ok(())
    }

    /// Live page ids in increasing order.
    pub fn page_ids(&self) -> impl Iterator<Item = PageId> + '_ {
        self.pages
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .map(|(i, _)| PageId(i as u64))
    }

    fn slot_mut(&mut self, page: PageId) -> Result<&mut Option<Node>> {
        match self.pages.get_mut(page.0 as usize) {
            Some(slot @ Some(_)) => Ok(slot),
            _ => Err(Error::UnknownPage(page)),
        }
    }

    /// Writes the store and its tree metadata to `path`.
    ///
    /// File layout (little-endian): a 72-byte header (magic, version, page
    /// bytes, storage dims, active dims, underflow fraction, variant name,
    /// metric name, page count), the page array indexed by page id with freed
    /// pages marked free, and a 16-byte trailer (root id, height, reserved).
    pub fn persist(&self, path: impl AsRef<Path>, meta: &StoreMeta) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out, meta)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write, meta: &StoreMeta) -> Result<()> {
        let mut header = Vec::with_capacity(STORE_HEADER_BYTES);
        header.extend_from_slice(STORE_MAGIC);
        header.extend_from_slice(&STORE_VERSION.to_le_bytes());
        header.extend_from_slice(&(self.config.page_bytes as u32).to_le_bytes());
        header.extend_from_slice(&(self.config.storage_dims as u32).to_le_bytes());
        header.extend_from_slice(&(meta.active_dims as u32).to_le_bytes());
        header.extend_from_slice(&self.config.underflow_fraction.to_le_bytes());
        header.extend_from_slice(&encode_name(&meta.variant)?);
        header.extend_from_slice(&encode_name(&meta.metric)?);
        header.extend_from_slice(&(self.pages.len() as u64).to_le_bytes());
        debug_assert_eq!(header.len(), STORE_HEADER_BYTES);
        out.write_all(&header)?;

        let mut buf = Vec::with_capacity(self.config.page_bytes);
        for page in &self.pages {
            buf.clear();
            encode_page(page.as_ref(), &self.config, &mut buf);
            out.write_all(&buf)?;
        }

        out.write_all(&meta.root.0.to_le_bytes())?;
        out.write_all(&meta.height.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, StoreMeta)> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, StoreMeta)> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(8)? != STORE_MAGIC {
            return Err(Error::Format { offset: 0, reason: "bad magic bytes".into() });
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(r.error_at(8, format!("unsupported version {version}")));
        }
        let page_bytes = r.u32()? as usize;
        let storage_dims = r.u32()? as usize;
        let active_dims = r.u32()? as usize;
        let underflow = r.f64()?;
        let config = PageConfig::new(page_bytes, storage_dims, underflow)
            .map_err(|e| r.error_at(12, e.to_string()))?;
        if active_dims == 0 || active_dims > storage_dims {
            return Err(r.error_at(20, format!("active dims {active_dims} outside 1..={storage_dims}")));
        }
        let variant = r.name()?;
        let metric = r.name()?;
        let page_count = r.u64()? as usize;

        let expected = STORE_HEADER_BYTES as u128
            + page_count as u128 * page_bytes as u128
            + STORE_TRAILER_BYTES as u128;
        if bytes.len() as u128 != expected {
            return Err(r.error_at(
                bytes.len().min(STORE_HEADER_BYTES) as u64,
                format!("file is {} bytes, header implies {expected}", bytes.len()),
            ));
        }

        let mut pages = Vec::with_capacity(page_count);
        let mut live = 0;
        for _ in 0..page_count {
            let start = r.pos as u64;
            let page = decode_page(r.take(page_bytes)?, &config, start)?;
            live += page.is_some() as usize;
            pages.push(page);
        }
        let root = PageId(r.u64()?);
        let height = r.u32()?;
        let store = Self { config, pages, live, page_limit: None };
        match store.get(root) {
            Ok(node) if node.level == height => {}
            _ => {
                return Err(r.error_at(
                    (bytes.len() - STORE_TRAILER_BYTES) as u64,
                    format!("root {root} is not a live node at level {height}"),
                ))
            }
        }
        Ok((store, StoreMeta { variant, metric, active_dims, root, height }))
    }
}

fn encode_name(name: &str) -> Result<[u8; NAME_BYTES]> {
    let raw = name.as_bytes();
    if raw.len() > NAME_BYTES || raw.contains(&0) {
        return Err(Error::InvalidConfig(format!("name `{name}` does not fit the store header")));
    }
    let mut out = [0u8; NAME_BYTES];
    out[..raw.len()].copy_from_slice(raw);
    Ok(out)
}

/// Appends exactly `config.page_bytes()` bytes encoding `node` to `out`.
pub fn encode_page(node: Option<&Node>, config: &PageConfig, out: &mut Vec<u8>) {
    let start = out.len();
    match node {
        None => {
            out.push(KIND_FREE);
            out.resize(start + PAGE_HEADER_BYTES, 0);
        }
        Some(node) => {
            out.push(match node.kind() {
                NodeKind::Leaf => KIND_LEAF,
                NodeKind::Internal => KIND_INTERNAL,
            });
            out.push(0);
            out.extend_from_slice(&(node.level as u16).to_le_bytes());
            out.extend_from_slice(&(node.len() as u32).to_le_bytes());
            out.extend_from_slice(&[0u8; 8]);
            match &node.entries {
                Entries::Leaf(v) => {
                    for e in v {
                        put_vector(out, &e.vector);
                        out.extend_from_slice(&e.object_id.to_le_bytes());
                        out.extend_from_slice(&e.parent_distance.to_le_bytes());
                    }
                }
                Entries::Internal(v) => {
                    for e in v {
                        put_vector(out, &e.routing_object);
                        out.extend_from_slice(&e.child.0.to_le_bytes());
                        out.extend_from_slice(&e.covering_radius.to_le_bytes());
                        out.extend_from_slice(&e.parent_distance.to_le_bytes());
                    }
                }
            }
        }
    }
    assert!(out.len() - start <= config.page_bytes, "node exceeds page size");
    out.resize(start + config.page_bytes, 0);
}

fn put_vector(out: &mut Vec<u8>, v: &Vector) {
    for c in v.iter() {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

/// Decodes one page; `base` is its offset in the enclosing file, used for
/// diagnostics.
pub fn decode_page(bytes: &[u8], config: &PageConfig, base: u64) -> Result<Option<Node>> {
    let mut r = ByteReader { bytes, pos: 0 };
    let kind = match r.take(1)?[0] {
        KIND_FREE => return Ok(None),
        KIND_LEAF => NodeKind::Leaf,
        KIND_INTERNAL => NodeKind::Internal,
        other => {
            return Err(Error::Format { offset: base, reason: format!("unknown page kind {other}") })
        }
    };
    r.take(1)?;
    let level = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as u32;
    let count = r.u32()? as usize;
    r.take(8)?;
    if count > config.capacity(kind) {
        return Err(Error::Format {
            offset: base + 4,
            reason: format!("entry count {count} exceeds capacity {}", config.capacity(kind)),
        });
    }
    if (kind == NodeKind::Leaf) != (level == 0) {
        return Err(Error::Format { offset: base + 2, reason: format!("{kind:?} page at level {level}") });
    }
    let dims = config.storage_dims();
    let vector = |r: &mut ByteReader| -> Result<Vector> {
        let at = base + r.pos as u64;
        let comps = (0..dims).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Vector::try_new(comps).map_err(|e| Error::Format { offset: at, reason: e.to_string() })
    };
    let entries = match kind {
        NodeKind::Leaf => Entries::Leaf(
            (0..count)
                .map(|_| {
                    Ok(LeafEntry { vector: vector(&mut r)?, object_id: r.u64()?, parent_distance: r.f64()? })
                })
                .collect::<Result<_>>()?,
        ),
        NodeKind::Internal => Entries::Internal(
            (0..count)
                .map(|_| {
                    Ok(RoutingEntry {
                        routing_object: vector(&mut r)?,
                        child: PageId(r.u64()?),
                        covering_radius: r.f64()?,
                        parent_distance: r.f64()?,
                    })
                })
                .collect::<Result<_>>()?,
        ),
    };
    Ok(Some(Node { level, entries }))
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format { offset: self.pos as u64, reason: format!("unexpected end of data reading {n} bytes") }
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String> {
        let at = self.pos as u64;
        let raw = self.take(NAME_BYTES)?;
        let len = raw.iter().position(|&b| b == 0).unwrap_or(NAME_BYTES);
        String::from_utf8(raw[..len].to_vec())
            .map_err(|_| Error::Format { offset: at, reason: "name is not UTF-8".into() })
    }

    fn error_at(&self, offset: u64, reason: String) -> Error {
        Error::Format { offset, reason }
    }
}
