//! `smtree`: builds trees from synthetic datasets and measures them.
//!
//! Exit codes: 0 on success, 2 for bad usage or unreadable input, 3 when a
//! tree fails its integrity check.

use std::fmt::Display;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtree::datagen::{self, GenSpec};
use smtree::{DataObject, PageConfig, Query, Tree, TreeConfig, TreeStats, VerifyReport, ViolationKind};

#[derive(Parser)]
#[command(name = "smtree", version, about = "Symmetric M-tree index and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
    /// Insert a dataset into a new tree and save it.
    Build(BuildArgs),
    /// Run the query benchmark against saved trees and print CSV.
    Bench(BenchArgs),
    /// Insert a dataset, delete half of it, and save the result.
    Churn(ChurnArgs),
    /// Print the structure of a saved tree.
    Stats(StatsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// clustered, polynomial or uniform.
    #[arg(long, default_value = "clustered")]
    kind: String,
    #[arg(long, default_value_t = 25_000)]
    count: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    dims: usize,
    /// Number of cluster centres.
    #[arg(long, default_value_t = 50)]
    clusters: usize,
    /// Largest per-component offset from a cluster centre.
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
    /// Exponent of the polynomial distribution.
    #[arg(long, default_value_t = 3)]
    exponent: u32,
    #[arg(long)]
    out: PathBuf,
    /// Also write the rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    /// Number of leading components the metric looks at.
    #[arg(long, default_value_t = 20)]
    dims: usize,
    #[arg(long, default_value = "linf")]
    metric: String,
    #[arg(long, default_value_t = smtree::page::DEFAULT_PAGE_BYTES)]
    page_bytes: usize,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    data: PathBuf,
    /// sm or classic.
    #[arg(long, default_value = "sm")]
    variant: String,
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Saved trees to measure.
    #[arg(long = "store", required = true)]
    stores: Vec<PathBuf>,
    /// Dataset the trees were built from; query centres are fresh draws from
    /// its distribution.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChurnArgs {
    /// Dataset of 2N objects; N of them are deleted again.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    tree: TreeArgs,
    /// Seed choosing which half is deleted.
    #[arg(long, default_value_t = 1)]
    delete_seed: u64,
    /// Delete as soon as possible instead of after all inserts.
    #[arg(long)]
    interleave: bool,
    /// Also build the surviving objects directly and report that tree.
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    store: PathBuf,
}

enum Failure {
    Usage(String),
    Integrity(String),
}

impl From<smtree::Error> for Failure {
    fn from(e: smtree::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Build(a) => build(a),
        Command::Bench(a) => bench(a),
        Command::Churn(a) => churn(a),
        Command::Stats(a) => stats(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Integrity(msg)) => {
            eprintln!("integrity check failed\n{msg}");
            ExitCode::from(3)
        }
    }
}

fn line(key: &str, value: impl Display) {
    println!("{key}: {value}");
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let spec = GenSpec {
        kind: a.kind,
        count: a.count,
        dims: a.dims,
        seed_count: a.clusters,
        amplitude: a.amplitude,
        exponent: a.exponent,
        rng_seed: a.seed,
    };
    let objects = datagen::generate(&spec)?;
    datagen::write_dataset(&a.out, &spec, &objects)?;
    if let Some(path) = a.csv {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_owned()];
        header.extend((0..spec.dims).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for o in &objects {
            let mut row = vec![o.id.to_string()];
            row.extend(o.vector.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    line("count", objects.len());
    line("seed", spec.rng_seed);
    Ok(())
}

fn new_tree(variant: &str, args: &TreeArgs, storage_dims: usize) -> Result<Tree, Failure> {
    let page = PageConfig::new(args.page_bytes, storage_dims, smtree::page::DEFAULT_UNDERFLOW_FRACTION)?;
    let config = TreeConfig { metric: args.metric.clone(), ..TreeConfig::default() }
        .with_variant(variant)
        .with_active_dims(args.dims)
        .with_page(page);
    Ok(Tree::new(config)?)
}

/// Verifies `tree`, tolerating inexact radii in variants that never
/// promised them.
fn check(tree: &Tree) -> Result<VerifyReport, Failure> {
    let report = tree.verify();
    let allowed: &[ViolationKind] = if tree.variant().exact_radii() { &[] } else { &[ViolationKind::RadiusExactness] };
    if report.is_clean_except(allowed) {
        Ok(report)
    } else {
        Err(Failure::Integrity(report.to_string()))
    }
}

fn print_summary(tree: &Tree, stats: &TreeStats) {
    line("variant", tree.variant().name());
    line("objects", stats.objects);
    line("height", stats.height);
    line("nodes", stats.nodes);
    line("leaf nodes", stats.leaf_nodes);
    line("mean occupancy", format!("{:.4}", stats.mean_occupancy));
}

fn build(a: BuildArgs) -> Result<(), Failure> {
    let (spec, objects) = datagen::read_dataset(&a.data)?;
    let mut tree = new_tree(&a.variant, &a.tree, spec.dims)?;
    for o in objects {
        tree.insert(o)?;
    }
    let evals = tree.distance_count();
    let report = check(&tree)?;
    print_summary(&tree, &tree.stats());
    line("distance evaluations", evals);
    line("violations", report.violations.len());
    line("radius exactness violations", report.count(ViolationKind::RadiusExactness));
    tree.save(&a.out)?;
    Ok(())
}

fn mean<I: IntoIterator<Item = u64>>(values: I, n: usize) -> f64 {
    values.into_iter().sum::<u64>() as f64 / n as f64
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    if a.count == 0 {
        return Err(Failure::Usage("--count must be at least 1".into()));
    }
    let (spec, _) = datagen::read_dataset(&a.data)?;
    let centers = datagen::query_points(&spec, a.count, a.seed)?;
    let out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variant", "dims", "query", "param", "mean_io", "mean_dist_evals"])?;

    for path in &a.stores {
        let tree = load(path)?;
        let variant = tree.variant().name();
        let dims = tree.metric().active_dims().to_string();
        let mut row = |query: &str, param: String, io: f64, evals: f64| {
            w.write_record([variant, &dims, query, &param, &format!("{io:.2}"), &format!("{evals:.2}")])
        };

        for k in [1usize, 10, 50] {
            let mut knn = Vec::with_capacity(centers.len());
            let mut range = Vec::with_capacity(centers.len());
            for c in &centers {
                let nn = tree.search(&Query::knn(c.clone(), k)?)?;
                let radius = nn.hits.last().map_or(0.0, |h| h.distance);
                range.push(tree.search(&Query::range(c.clone(), radius)?)?.stats);
                knn.push(nn.stats);
            }
            let n = centers.len();
            row(
                "knn",
                k.to_string(),
                mean(knn.iter().map(|s| s.page_ios), n),
                mean(knn.iter().map(|s| s.distance_evals), n),
            )?;
            row(
                "range",
                k.to_string(),
                mean(range.iter().map(|s| s.page_ios), n),
                mean(range.iter().map(|s| s.distance_evals), n),
            )?;
        }

        let stored = tree.objects();
        if !stored.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut exact = Vec::with_capacity(a.count);
            for _ in 0..a.count {
                let o = &stored[rng.random_range(0..stored.len())];
                exact.push(tree.search(&Query::range(o.vector.clone(), 0.0)?)?.stats);
            }
            row(
                "range0",
                "0".into(),
                mean(exact.iter().map(|s| s.page_ios), a.count),
                mean(exact.iter().map(|s| s.distance_evals), a.count),
            )?;
        }
        // A sequential scan reads every leaf and measures every object.
        let stats = tree.stats();
        row("seqscan", String::new(), stats.leaf_nodes as f64, stats.objects as f64)?;
    }
    w.flush()?;
    Ok(())
}

fn churn(a: ChurnArgs) -> Result<(), Failure> {
    let (spec, objects) = datagen::read_dataset(&a.data)?;
    let mut tree = new_tree("sm", &a.tree, spec.dims)?;

    let mut doomed = vec![false; objects.len()];
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(a.delete_seed));
    for &i in &order[..objects.len() / 2] {
        doomed[i] = true;
    }

    let mut steps = 0u64;
    let mut step = |tree: &Tree| -> Result<(), Failure> {
        steps += 1;
        // Sample roughly 1% of intermediate states.
        if steps.is_multiple_of(100) {
            check(tree)?;
        }
        Ok(())
    };
    if a.interleave {
        let mut pending = std::collections::VecDeque::new();
        for (i, o) in objects.iter().enumerate() {
            tree.insert(o.clone())?;
            step(&tree)?;
            if let Some(j) = pending.pop_front() {
                delete(&mut tree, &objects[j])?;
                step(&tree)?;
            }
            if doomed[i] {
                pending.push_back(i);
            }
        }
        for j in pending {
            delete(&mut tree, &objects[j])?;
            step(&tree)?;
        }
    } else {
        for o in &objects {
            tree.insert(o.clone())?;
            step(&tree)?;
        }
        for (o, _) in objects.iter().zip(&doomed).filter(|(_, &d)| d) {
            delete(&mut tree, o)?;
            step(&tree)?;
        }
    }
    check(&tree)?;

    let stats = tree.stats();
    print_summary(&tree, &stats);
    line("deleted", objects.len() / 2);
    if a.compare {
        let mut direct = new_tree("sm", &a.tree, spec.dims)?;
        for (o, _) in objects.iter().zip(&doomed).filter(|(_, &d)| !d) {
            direct.insert(o.clone())?;
        }
        let d = direct.stats();
        line("direct leaf nodes", d.leaf_nodes);
        line("direct mean occupancy", format!("{:.4}", d.mean_occupancy));
        line("leaf ratio", format!("{:.4}", stats.leaf_nodes as f64 / d.leaf_nodes.max(1) as f64));
    }
    tree.save(&a.out)?;
    Ok(())
}

fn delete(tree: &mut Tree, o: &DataObject) -> Result<(), Failure> {
    if !tree.delete(o)? {
        return Err(Failure::Integrity(format!("object {} vanished before its delete", o.id)));
    }
    Ok(())
}

fn load(path: &Path) -> Result<Tree, Failure> {
    Tree::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn stats(a: StatsArgs) -> Result<(), Failure> {
    let tree = load(&a.store)?;
    let stats = tree.stats();
    print_summary(&tree, &stats);
    let per_level: Vec<String> = stats.nodes_per_level.iter().map(usize::to_string).collect();
    line("nodes per level", per_level.join(" "));
    let hist: Vec<String> = stats.occupancy_histogram.iter().map(usize::to_string).collect();
    line("occupancy histogram", hist.join(" "));
    line("max radius residual", format!("{:e}", stats.max_radius_residual));
    Ok(())
}
