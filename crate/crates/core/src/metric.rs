//! Metric-space contract and the concrete distance functions.
//!
//! Every tree is parameterised by a [`Metric`] chosen by name at runtime
//! through [`by_name`]. Vectors are always stored at the full storage
//! dimension; a metric may look at only the first `active_dims` components,
//! which is how one dataset serves experiments at several dimensionalities.

use std::fmt;
use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// A point in the metric space: a fixed-length list of finite coordinates.
#[derive(Clone, PartialEq)]
pub struct Vector(Box<[f64]>);

impl Vector {
    pub fn try_new(components: Vec<f64>) -> Result<Self> {
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(components.into_boxed_slice()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }
}

/// Panics on non-finite components; use [`Vector::try_new`] for untrusted input.
impl From<Vec<f64>> for Vector {
    fn from(components: Vec<f64>) -> Self {
        Self::try_new(components).expect("vector components must be finite")
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// An identified object stored in the index.
#[derive(Clone, Debug, PartialEq)]
pub struct DataObject {
    pub id: u64,
    pub vector: Vector,
}

impl DataObject {
    pub fn new(id: u64, vector: impl Into<Vector>) -> Self {
        Self { id, vector: vector.into() }
    }
}

pub trait Metric: Send + Sync + fmt::Debug {
    /// Registry name, also written into store files.
    fn name(&self) -> &'static str;

    /// Number of leading components the metric considers.
    fn active_dims(&self) -> usize;

    /// Distance between two vectors of equal storage dimension.
    ///
    /// Callers guarantee `x.len() == y.len() >= self.active_dims()`.
    fn distance(&self, x: &[f64], y: &[f64]) -> f64;

    fn try_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if x.len() < self.active_dims() {
            return Err(Error::DimensionMismatch { expected: self.active_dims(), got: x.len() });
        }
        Ok(self.distance(x, y))
    }
}

/// The d∞ (Chebyshev) metric over the first `active_dims` components.
#[derive(Clone, Copy, Debug)]
pub struct Chebyshev {
    active_dims: usize,
}

impl Chebyshev {
    pub fn new(active_dims: usize) -> Self {
        Self { active_dims }
    }
}

impl Metric for Chebyshev {
    fn name(&self) -> &'static str {
        "linf"
    }

    fn active_dims(&self) -> usize {
        self.active_dims
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert!(x.len() == y.len() && x.len() >= self.active_dims);
        x[..self.active_dims]
            .iter()
            .zip(&y[..self.active_dims])
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Euclidean distance over the first `active_dims` components.
#[derive(Clone, Copy, Debug)]
pub struct Euclidean {
    active_dims: usize,
}

impl Euclidean {
    pub fn new(active_dims: usize) -> Self {
        Self { active_dims }
    }
}

impl Metric for Euclidean {
    fn name(&self) -> &'static str {
        "l2"
    }

    fn active_dims(&self) -> usize {
        self.active_dims
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert!(x.len() == y.len() && x.len() >= self.active_dims);
        x[..self.active_dims]
            .iter()
            .zip(&y[..self.active_dims])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

type MetricCtor = fn(usize) -> Arc<dyn Metric>;

const METRICS: &[(&str, MetricCtor)] = &[
    ("linf", |n| Arc::new(Chebyshev::new(n))),
    ("chebyshev", |n| Arc::new(Chebyshev::new(n))),
    ("l2", |n| Arc::new(Euclidean::new(n))),
    ("euclidean", |n| Arc::new(Euclidean::new(n))),
];

/// Names accepted by [`by_name`].
pub fn names() -> impl Iterator<Item = &'static str> {
    METRICS.iter().map(|(name, _)| *name)
}

/// Looks up a metric by registry name.
pub fn by_name(name: &str, active_dims: usize) -> Result<Arc<dyn Metric>> {
    if active_dims == 0 {
        return Err(Error::InvalidConfig("active dimensions must be at least 1".into()));
    }
    METRICS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(active_dims))
        .ok_or_else(|| Error::UnknownStrategy { kind: "metric", name: name.to_owned() })
}

/// A metric that tallies every evaluation into a [`DistanceCounter`].
#[derive(Debug)]
pub struct CountingMetric {
    inner: Arc<dyn Metric>,
    counter: DistanceCounter,
}

impl CountingMetric {
    pub fn new(inner: Arc<dyn Metric>) -> Self {
        Self { inner, counter: DistanceCounter::default() }
    }

    pub fn counter(&self) -> &DistanceCounter {
        &self.counter
    }

    pub fn inner(&self) -> &Arc<dyn Metric> {
        &self.inner
    }
}

impl Metric for CountingMetric {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn active_dims(&self) -> usize {
        self.inner.active_dims()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.counter.bump();
        self.inner.distance(x, y)
    }
}

/// Tally of metric evaluations. Shared by concurrent readers, hence atomic.
#[derive(Debug, Default)]
pub struct DistanceCounter(AtomicU64);

impl DistanceCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}
