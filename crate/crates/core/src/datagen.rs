//! Deterministic synthetic datasets in `[0, 1]^dims`.
//!
//! Three distributions are registered by name:
//!
//! * `clustered`: points scattered around uniformly drawn seed points. Each
//!   component gets an independent offset `A * sign(v) * (1 - cos(pi*|v|/2))`
//!   with `v` uniform in `[-1, 1]`, whose density peaks at zero and falls
//!   off monotonically to the amplitude `A`. Results are clamped to `[0, 1]`.
//! * `polynomial`: each component is `u^p` for uniform `u`.
//! * `uniform`: each component is uniform.
//!
//! Randomness comes from ChaCha8 seeded with the 64-bit spec seed. Cluster
//! seeds use stream 0, dataset points stream 1 and query points stream 2,
//! so queries share the dataset's clusters but not its points.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{DataObject, Vector};

const DATA_MAGIC: &[u8; 8] = b"SMTDATA\x01";
const KIND_BYTES: usize = 16;
const DATA_HEADER_BYTES: usize = 64;

const STREAM_SEEDS: u64 = 0;
const STREAM_POINTS: u64 = 1;
const STREAM_QUERIES: u64 = 2;

/// Parameters of a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub kind: String,
    pub count: usize,
    pub dims: usize,
    /// Number of cluster centres (clustered only).
    pub seed_count: usize,
    /// Maximum per-component offset from a cluster centre (clustered only).
    pub amplitude: f64,
    /// Exponent of the polynomial transform (polynomial only).
    pub exponent: u32,
    pub rng_seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            kind: "clustered".into(),
            count: 25_000,
            dims: crate::page::DEFAULT_STORAGE_DIMS,
            seed_count: 50,
            amplitude: 0.1,
            exponent: 3,
            rng_seed: 42,
        }
    }
}

impl GenSpec {
    pub fn new(kind: &str, count: usize, rng_seed: u64) -> Self {
        Self { kind: kind.to_owned(), count, rng_seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        if self.dims == 0 {
            return bad("dims must be at least 1".into());
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 0.5) {
            return bad(format!("amplitude {} outside (0, 0.5]", self.amplitude));
        }
        if self.seed_count == 0 {
            return bad("seed count must be at least 1".into());
        }
        if self.exponent == 0 {
            return bad("exponent must be at least 1".into());
        }
        if self.kind.len() > KIND_BYTES {
            return bad(format!("kind `{}` is too long", self.kind));
        }
        distribution(self).map(|_| ())
    }
}

/// A way of drawing one point.
pub trait Distribution: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Fills `out` with one point.
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

#[derive(Clone, Debug)]
pub struct Clustered {
    seeds: Vec<Vec<f64>>,
    amplitude: f64,
}

impl Clustered {
    pub fn new(spec: &GenSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        rng.set_stream(STREAM_SEEDS);
        let seeds = (0..spec.seed_count).map(|_| (0..spec.dims).map(|_| rng.random()).collect()).collect();
        Self { seeds, amplitude: spec.amplitude }
    }

    pub fn seeds(&self) -> &[Vec<f64>] {
        &self.seeds
    }
}

/// Maps a uniform `u` in `[0, 1)` to an offset in `(-amplitude, amplitude)`
/// concentrated near zero.
pub fn cluster_offset(u: f64, amplitude: f64) -> f64 {
    let v = 2.0 * u - 1.0;
    amplitude * v.signum() * (1.0 - (PI * v.abs() / 2.0).cos())
}

impl Distribution for Clustered {
    fn name(&self) -> &'static str {
        "clustered"
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let seed = &self.seeds[rng.random_range(0..self.seeds.len())];
        for (c, s) in out.iter_mut().zip(seed) {
            *c = (s + cluster_offset(rng.random(), self.amplitude)).clamp(0.0, 1.0);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Polynomial {
    pub exponent: u32,
}

impl Distribution for Polynomial {
    fn name(&self) -> &'static str {
        "polynomial"
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for c in out {
            *c = rng.random::<f64>().powi(self.exponent as i32);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Uniform;

impl Distribution for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for c in out {
            *c = rng.random();
        }
    }
}

type DistributionCtor = fn(&GenSpec) -> Box<dyn Distribution>;

const DISTRIBUTIONS: &[(&str, DistributionCtor)] = &[
    ("clustered", |s| Box::new(Clustered::new(s))),
    ("polynomial", |s| Box::new(Polynomial { exponent: s.exponent })),
    ("uniform", |_| Box::new(Uniform)),
];

pub fn kinds() -> impl Iterator<Item = &'static str> {
    DISTRIBUTIONS.iter().map(|(name, _)| *name)
}

/// Builds the distribution named by `spec.kind`.
pub fn distribution(spec: &GenSpec) -> Result<Box<dyn Distribution>> {
    DISTRIBUTIONS
        .iter()
        .find(|(n, _)| *n == spec.kind)
        .map(|(_, ctor)| ctor(spec))
        .ok_or_else(|| Error::UnknownStrategy { kind: "distribution", name: spec.kind.clone() })
}

fn draw(spec: &GenSpec, count: usize, seed: u64, stream: u64) -> Result<Vec<Vector>> {
    spec.validate()?;
    let dist = distribution(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..count)
        .map(|_| {
            let mut v = vec![0.0; spec.dims];
            dist.sample(&mut rng, &mut v);
            Vector::from(v)
        })
        .collect())
}

/// The dataset described by `spec`, with ids `0..count`.
pub fn generate(spec: &GenSpec) -> Result<Vec<DataObject>> {
    Ok(draw(spec, spec.count, spec.rng_seed, STREAM_POINTS)?
        .into_iter()
        .enumerate()
        .map(|(i, vector)| DataObject { id: i as u64, vector })
        .collect())
}

/// Fresh points from the same distribution as `spec` (same cluster
/// centres), drawn with `query_seed`.
pub fn query_points(spec: &GenSpec, count: usize, query_seed: u64) -> Result<Vec<Vector>> {
    draw(spec, count, query_seed, STREAM_QUERIES)
}

/// Writes a dataset file: a 64-byte little-endian header (magic, kind,
/// dims, seed count, count, rng seed, exponent, reserved, amplitude)
/// followed by one row per object (id as u64, then `dims` f64 components).
pub fn write_dataset(path: impl AsRef<Path>, spec: &GenSpec, objects: &[DataObject]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset_to(&mut out, spec, objects)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset_to(out: &mut impl Write, spec: &GenSpec, objects: &[DataObject]) -> Result<()> {
    let mut kind = [0u8; KIND_BYTES];
    if spec.kind.len() > KIND_BYTES {
        return Err(Error::InvalidConfig(format!("kind `{}` is too long", spec.kind)));
    }
    kind[..spec.kind.len()].copy_from_slice(spec.kind.as_bytes());
    let mut header = Vec::with_capacity(DATA_HEADER_BYTES);
    header.extend_from_slice(DATA_MAGIC);
    header.extend_from_slice(&kind);
    header.extend_from_slice(&(spec.dims as u32).to_le_bytes());
    header.extend_from_slice(&(spec.seed_count as u32).to_le_bytes());
    header.extend_from_slice(&(objects.len() as u64).to_le_bytes());
    header.extend_from_slice(&spec.rng_seed.to_le_bytes());
    header.extend_from_slice(&spec.exponent.to_le_bytes());
    header.extend_from_slice(&0u32.to_le_bytes());
    header.extend_from_slice(&spec.amplitude.to_le_bytes());
    debug_assert_eq!(header.len(), DATA_HEADER_BYTES);
    out.write_all(&header)?;
    for o in objects {
        if o.vector.dims() != spec.dims {
            return Err(Error::DimensionMismatch { expected: spec.dims, got: o.vector.dims() });
        }
        out.write_all(&o.id.to_le_bytes())?;
        for c in o.vector.iter() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a dataset file. The returned spec's `count` is the row count.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(GenSpec, Vec<DataObject>)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    parse_dataset(&bytes)
}

pub fn parse_dataset(bytes: &[u8]) -> Result<(GenSpec, Vec<DataObject>)> {
    let format = |offset: usize, reason: String| Error::Format { offset: offset as u64, reason };
    if bytes.len() < DATA_HEADER_BYTES {
        return Err(format(bytes.len(), "truncated header".into()));
    }
    if &bytes[..8] != DATA_MAGIC {
        return Err(format(0, "bad magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());

    let raw_kind = &bytes[8..8 + KIND_BYTES];
    let len = raw_kind.iter().position(|&b| b == 0).unwrap_or(KIND_BYTES);
    let kind = std::str::from_utf8(&raw_kind[..len]).map_err(|_| format(8, "kind is not UTF-8".into()))?;
    let dims = u32_at(24) as usize;
    let count = u64_at(32) as usize;
    let spec = GenSpec {
        kind: kind.to_owned(),
        dims,
        seed_count: u32_at(28) as usize,
        count,
        rng_seed: u64_at(40),
        exponent: u32_at(48),
        amplitude: f64_at(56),
    };
    if dims == 0 {
        return Err(format(24, "zero dimensions".into()));
    }
    let row = 8 + dims * 8;
    let expected = (DATA_HEADER_BYTES as u128) + (count as u128) * (row as u128);
    if bytes.len() as u128 != expected {
        return Err(format(32, format!("file is {} bytes, header implies {expected}", bytes.len())));
    }
    let mut objects = Vec::with_capacity(count);
    for i in 0..count {
        let at = DATA_HEADER_BYTES + i * row;
        let comps: Vec<f64> = (0..dims).map(|d| f64_at(at + 8 + d * 8)).collect();
        let vector = Vector::try_new(comps).map_err(|e| format(at + 8, e.to_string()))?;
        objects.push(DataObject { id: u64_at(at), vector });
    }
    Ok((spec, objects))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: &str, count: usize) -> GenSpec {
        GenSpec::new(kind, count, 1234)
    }

    #[test]
    fn deterministic() {
        for kind in kinds() {
            let a = generate(&spec(kind, 200)).unwrap();
            let b = generate(&spec(kind, 200)).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|o| o.vector.iter().all(|&c| (0.0..=1.0).contains(&c))));
        }
        let other = generate(&GenSpec::new("uniform", 200, 1235)).unwrap();
        assert_ne!(other, generate(&spec("uniform", 200)).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&spec("uniform", 0)).is_err());
        assert!(generate(&spec("gaussian", 10)).is_err());
        assert!(generate(&GenSpec { amplitude: 0.7, ..spec("clustered", 10) }).is_err());
        assert!(generate(&GenSpec { exponent: 0, ..spec("polynomial", 10) }).is_err());
    }

    #[test]
    fn uniform_means_near_half() {
        let data = generate(&spec("uniform", 10_000)).unwrap();
        for d in 0..20 {
            let mean = data.iter().map(|o| o.vector[d]).sum::<f64>() / data.len() as f64;
            assert!((0.48..=0.52).contains(&mean), "dim {d}: {mean}");
        }
    }

    #[test]
    fn polynomial_median() {
        let data = generate(&spec("polynomial", 10_000)).unwrap();
        let total = data.len() * 20;
        let below = data.iter().flat_map(|o| o.vector.iter()).filter(|&&c| c < 0.125).count();
        let frac = below as f64 / total as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn clustered_offsets_concentrate() {
        let s = spec("clustered", 20_000);
        let clustered = Clustered::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.rng_seed);
        rng.set_stream(STREAM_POINTS);
        let data = generate(&s).unwrap();
        // Offsets relative to the nearest seed, away from the clamped boundary.
        let mut offsets = Vec::new();
        for o in &data {
            let seed = clustered
                .seeds()
                .iter()
                .min_by(|a, b| {
                    let da = a.iter().zip(o.vector.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    let db = b.iter().zip(o.vector.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    da.total_cmp(&db)
                })
                .unwrap();
            for (s, c) in seed.iter().zip(o.vector.iter()) {
                if *c > 0.0 && *c < 1.0 {
                    offsets.push((c - s).abs());
                }
            }
        }
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        assert!(mean < s.amplitude / 2.0, "{mean}");
    }

    #[test]
    fn offset_density_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let amplitude = 0.1;
        let bins = 10;
        let mut hist = vec![0usize; bins];
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let off = cluster_offset(rng.random(), amplitude).abs();
            total += off;
            hist[((off / amplitude * bins as f64) as usize).min(bins - 1)] += 1;
        }
        assert!(total / (n as f64) < amplitude / 2.0);
        for w in hist.windows(2) {
            assert!(w[1] as f64 <= w[0] as f64 * 1.02, "{hist:?}");
        }
    }

    #[test]
    fn queries_share_clusters_not_points() {
        let s = spec("clustered", 100);
        let data = generate(&s).unwrap();
        let q = query_points(&s, 100, 9).unwrap();
        assert_ne!(q[0], data[0].vector);
        assert_eq!(q, query_points(&s, 100, 9).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let s = spec("polynomial", 50);
        let data = generate(&s).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&mut buf, &s, &data).unwrap();
        assert_eq!(buf.len(), 64 + 50 * (8 + 160));
        let (back_spec, back) = parse_dataset(&buf).unwrap();
        assert_eq!(back_spec, s);
        assert_eq!(back, data);
        buf[0] = 0;
        assert!(matches!(parse_dataset(&buf), Err(Error::Format { offset: 0, .. })));
        assert!(parse_dataset(&buf[..70]).is_err());
    }
}
