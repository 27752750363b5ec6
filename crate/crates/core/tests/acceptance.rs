//! Acceptance gate. Each test checks one criterion and prints a single
//! `[PASS]` or `[FAIL]` line straight to stdout, so the verdicts show up
//! even when the harness captures output.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smtree::datagen::{generate, query_points, GenSpec};
use smtree::metric::Chebyshev;
use smtree::node::Entries;
use smtree::oracle::{scan_knn, scan_range};
use smtree::{DataObject, PageConfig, Query, Tree, TreeConfig, Vector, ViolationKind};

const QUERIES: usize = 100;
const QUERY_SEED: u64 = 9_001;

fn report(id: &str, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[{verdict}] {id} {title}: {detail}\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{id} {title}: {detail}");
}

fn clustered(count: usize, seed: u64) -> (GenSpec, Vec<DataObject>) {
    let spec = GenSpec::new("clustered", count, seed);
    let data = generate(&spec).unwrap();
    (spec, data)
}

fn build(variant: &str, dims: usize, data: &[DataObject]) -> Tree {
    let mut tree = Tree::new(TreeConfig::default().with_variant(variant).with_active_dims(dims)).unwrap();
    for o in data {
        tree.insert(o.clone()).unwrap();
    }
    tree
}

fn mean_io(tree: &Tree, queries: &[Query]) -> f64 {
    let total: u64 = queries.iter().map(|q| tree.search(q).unwrap().stats.page_ios).sum();
    total as f64 / queries.len() as f64
}

fn knn_queries(centers: &[Vector], k: usize) -> Vec<Query> {
    centers.iter().map(|c| Query::knn(c.clone(), k).unwrap()).collect()
}

fn sorted_distances(mut d: Vec<f64>) -> Vec<f64> {
    d.sort_by(f64::total_cmp);
    d
}

#[test]
fn c1_invariants_hold_through_build_and_churn() {
    let mut checks = 0usize;
    let mut failures = Vec::new();
    for (n, seed) in [(5_000usize, 11u64), (25_000, 12)] {
        let (_, data) = clustered(n + n / 2, seed);
        let (initial, fresh) = data.split_at(n);
        let mut tree = build("sm", 20, initial);
        let mut check = |tree: &Tree, when: &str| {
            checks += 1;
            let report = tree.verify();
            if !report.is_clean() {
                failures.push(format!("n={n} {when}: {}", report.violations.len()));
            }
        };
        check(&tree, "build");

        let mut live = initial.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fresh = fresh.iter();
        let mut mutations = 0usize;
        // Alternate deleting a random live object with inserting a new one.
        for _ in 0..n / 2 {
            let victim = live.swap_remove(rng.random_range(0..live.len()));
            assert!(tree.delete(&victim).unwrap());
            mutations += 1;
            if mutations.is_multiple_of(500) {
                check(&tree, &format!("mutation {mutations}"));
            }
            let o = fresh.next().unwrap().clone();
            tree.insert(o.clone()).unwrap();
            live.push(o);
            mutations += 1;
            if mutations.is_multiple_of(500) {
                check(&tree, &format!("mutation {mutations}"));
            }
        }
    }
    let detail = format!("{checks} checkpoints, {} with violations {:?}", failures.len(), failures);
    report("C1", "invariant suite", failures.is_empty(), &detail);
}

#[test]
fn c2_queries_match_linear_scan() {
    let (spec, data) = clustered(5_000, 21);
    let centers = query_points(&spec, QUERIES, QUERY_SEED).unwrap();
    let metric = Chebyshev::new(20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let radii: Vec<f64> = centers
        .iter()
        .map(|c| scan_knn(&data, &metric, c, 10)[9] * rng.random_range(0.5..1.5))
        .collect();

    let mut mismatches = Vec::new();
    for variant in ["sm", "classic"] {
        let tree = build(variant, 20, &data);
        for (c, &r) in centers.iter().zip(&radii) {
            let mut got = tree.range_query(c, r).unwrap().ids();
            got.sort_unstable();
            if got != scan_range(&data, &metric, c, r) {
                mismatches.push(format!("{variant} range r={r}"));
            }
        }
        for k in [1, 10, 50] {
            for c in &centers {
                let got = sorted_distances(tree.knn_query(c, k).unwrap().distances());
                if got != scan_knn(&data, &metric, c, k) {
                    mismatches.push(format!("{variant} NN-{k}"));
                }
            }
        }
    }
    let detail = format!("{} queries per variant, {} mismatches {:?}", 4 * QUERIES, mismatches.len(), mismatches);
    report("C2", "oracle equivalence", mismatches.is_empty(), &detail);
}

#[test]
fn c3_deletes_are_correct_and_preserve_answers() {
    let (_, data) = clustered(2_000, 31);
    let mut tree = build("sm", 20, &data);
    let mut order = data.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(31));
    let mut missing = 0usize;
    let mut dirty = 0usize;
    for o in &order {
        if !tree.delete(o).unwrap() {
            missing += 1;
        }
        if !tree.verify().is_clean() {
            dirty += 1;
        }
    }
    let emptied = tree.is_empty() && tree.height() == 0 && tree.store().live_pages() == 1;

    let (spec, data) = clustered(10_000, 32);
    let mut churned = build("sm", 20, &data);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(32));
    let (gone, kept) = order.split_at(data.len() / 2);
    for &i in gone {
        assert!(churned.delete(&data[i]).unwrap());
    }
    let mut kept = kept.to_vec();
    kept.sort_unstable();
    let survivors: Vec<DataObject> = kept.iter().map(|&i| data[i].clone()).collect();
    let direct = build("sm", 20, &survivors);
    let mut differing = 0usize;
    for c in query_points(&spec, QUERIES, QUERY_SEED).unwrap() {
        let a = sorted_distances(churned.knn_query(&c, 10).unwrap().distances());
        let b = sorted_distances(direct.knn_query(&c, 10).unwrap().distances());
        let r = a[9];
        let mut ra = churned.range_query(&c, r).unwrap().ids();
        let mut rb = direct.range_query(&c, r).unwrap().ids();
        ra.sort_unstable();
        rb.sort_unstable();
        if a != b || ra != rb {
            differing += 1;
        }
    }

    let pass = missing == 0 && dirty == 0 && emptied && differing == 0;
    let detail = format!(
        "2000 deletes: {missing} not found, {dirty} unclean states, emptied={emptied}; \
         churned vs direct: {differing}/{QUERIES} queries differ"
    );
    report("C3", "delete correctness", pass, &detail);
}

#[test]
fn c4_occupancy_after_churn() {
    let (_, data) = clustered(50_000, 41);
    let mut churned = build("sm", 20, &data);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(41));
    let (gone, kept) = order.split_at(25_000);
    for &i in gone {
        assert!(churned.delete(&data[i]).unwrap());
    }
    let mut kept = kept.to_vec();
    kept.sort_unstable();
    let survivors: Vec<DataObject> = kept.iter().map(|&i| data[i].clone()).collect();
    let direct = build("sm", 20, &survivors);

    let c = churned.stats();
    let d = direct.stats();
    let ratio = c.leaf_nodes as f64 / d.leaf_nodes as f64;
    let churn_ok = (0.40..=0.50).contains(&c.mean_occupancy);
    let direct_ok = (0.50..=0.68).contains(&d.mean_occupancy);
    let leaves_ok = ratio >= 1.10;
    let detail = format!(
        "churn occupancy {:.3} in [0.40, 0.50]: {churn_ok}; direct occupancy {:.3} in [0.50, 0.68]: {direct_ok}; \
         leaf pages {} vs {} (x{ratio:.3}) >= x1.10: {leaves_ok}",
        c.mean_occupancy, d.mean_occupancy, c.leaf_nodes, d.leaf_nodes
    );
    report("C4", "occupancy after churn", churn_ok && direct_ok && leaves_ok, &detail);
}

#[test]
fn c5_query_cost_trends() {
    let (spec, data) = clustered(25_000, 51);
    let uniform = generate(&GenSpec::new("uniform", 25_000, 51)).unwrap();
    let centers = query_points(&spec, QUERIES, QUERY_SEED).unwrap();
    let uniform_centers = query_points(&GenSpec::new("uniform", 25_000, 51), QUERIES, QUERY_SEED).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let exact: Vec<Query> =
        (0..QUERIES).map(|_| Query::range(data[rng.random_range(0..data.len())].vector.clone(), 0.0).unwrap()).collect();

    let mut failed = Vec::new();
    let mut notes = Vec::new();
    let mut nn1 = Vec::new();
    for variant in ["sm", "classic"] {
        let tree = build(variant, 20, &data);
        let r0 = mean_io(&tree, &exact);
        let k1 = mean_io(&tree, &knn_queries(&centers, 1));
        let k10 = mean_io(&tree, &knn_queries(&centers, 10));
        let k50 = mean_io(&tree, &knn_queries(&centers, 50));
        let low = mean_io(&build(variant, 2, &data), &knn_queries(&centers, 1));
        let flat = mean_io(&build(variant, 20, &uniform), &knn_queries(&uniform_centers, 1));
        notes.push(format!(
            "{variant}: R-0 {r0:.1} NN-1 {k1:.1} NN-10 {k10:.1} NN-50 {k50:.1} d2 {low:.1} uniform {flat:.1}"
        ));
        for (name, ok) in [("a", r0 <= k1), ("b", k1 <= k10 && k10 <= k50), ("c", k1 >= low), ("d", k1 <= flat)] {
            if !ok {
                failed.push(format!("{variant}({name})"));
            }
        }
        nn1.push(k1);
    }
    if nn1[0] > 2.0 * nn1[1] || nn1[1] > 2.0 * nn1[0] {
        failed.push("(e)".into());
    }
    let detail = format!("{}; failed {:?}", notes.join("; "), failed);
    report("C5", "query cost trends", failed.is_empty(), &detail);
}

#[test]
fn c6_matched_range_returns_knn_answers() {
    let (spec, data) = clustered(25_000, 61);
    let centers = query_points(&spec, QUERIES, QUERY_SEED).unwrap();
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for variant in ["sm", "classic"] {
        let tree = build(variant, 20, &data);
        for k in [1, 10, 50] {
            for c in &centers {
                total += 1;
                let nn = sorted_distances(tree.knn_query(c, k).unwrap().distances());
                let within = sorted_distances(tree.range_query(c, nn[k - 1]).unwrap().distances());
                if within.len() < k || within[..k] != nn[..] {
                    mismatches += 1;
                }
            }
        }
    }
    report("C6", "matched-query protocol", mismatches == 0, &format!("{mismatches}/{total} pairs disagree"));
}

#[test]
fn c7_insert_visits_are_linear_in_height() {
    let (_, data) = clustered(25_000, 71);
    let mut notes = Vec::new();
    let mut pass = true;
    for variant in ["sm", "classic"] {
        let mut tree = Tree::new(TreeConfig::default().with_variant(variant)).unwrap();
        let mut visits = 0u64;
        for o in &data {
            tree.insert(o.clone()).unwrap();
            visits += tree.last_mutation_visits();
        }
        let mean = visits as f64 / data.len() as f64;
        let bound = 4.0 * tree.height() as f64;
        pass &= mean <= bound;
        notes.push(format!("{variant}: {mean:.2} visits per insert, bound {bound}"));
    }
    report("C7", "insert complexity", pass, &notes.join("; "));
}

/// Routing entries whose child ball pokes out of their own ball.
fn escaping_children(tree: &Tree) -> usize {
    let metric = tree.metric();
    let store = tree.store();
    let mut escapes = 0;
    for page in store.page_ids() {
        let Entries::Internal(entries) = &store.get(page).unwrap().entries else { continue };
        for parent in entries {
            if let Entries::Internal(children) = &store.get(parent.child).unwrap().entries {
                escapes += children
                    .iter()
                    .filter(|c| {
                        metric.distance(&parent.routing_object, &c.routing_object) + c.covering_radius
                            > parent.covering_radius + 1e-9
                    })
                    .count();
            }
        }
    }
    escapes
}

#[test]
fn c8_classic_radii_are_asymmetric() {
    // Points spiralling outwards in the plane, so that late arrivals keep
    // widening the radii of subtrees built early on.
    let points: Vec<DataObject> = (0..120u64)
        .map(|i| {
            let t = i as f64 * 0.7;
            let mut v = vec![0.0; 20];
            v[0] = 0.5 + 0.004 * i as f64 * t.cos();
            v[1] = 0.5 + 0.004 * i as f64 * t.sin();
            DataObject::new(i, v)
        })
        .collect();
    let page = PageConfig::for_capacity(4, 20, 0.4).unwrap();
    let run = |variant: &str| {
        let mut tree =
            Tree::new(TreeConfig::default().with_variant(variant).with_active_dims(2).with_page(page)).unwrap();
        for o in &points {
            tree.insert(o.clone()).unwrap();
        }
        let report = tree.verify();
        (escaping_children(&tree), report.count(ViolationKind::RadiusExactness), report.count(ViolationKind::Containment), tree.height())
    };
    let (classic_escapes, _, classic_lost, classic_height) = run("classic");
    let (sm_escapes, sm_inexact, _, _) = run("sm");
    let pass = classic_escapes > 0 && classic_lost == 0 && sm_inexact == 0 && sm_escapes == 0;
    let detail = format!(
        "classic (height {classic_height}): {classic_escapes} child balls outside their parent, {classic_lost} objects uncovered; \
         sm: {sm_inexact} radius-exactness violations, {sm_escapes} escaping children"
    );
    report("C8", "asymmetry witness", pass, &detail);
}
