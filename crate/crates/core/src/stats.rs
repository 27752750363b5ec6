//! Structure and occupancy summaries.

use crate::node::Entries;
use crate::tree::TreeCore;
use crate::verify;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreeStats {
    pub height: u32,
    pub objects: usize,
    pub nodes: usize,
    pub leaf_nodes: usize,
    /// Node count per level, leaves first.
    pub nodes_per_level: Vec<usize>,
    /// Mean of `entries / capacity` over every node.
    pub mean_occupancy: f64,
    pub mean_leaf_occupancy: f64,
    /// Nodes bucketed by fill fraction in tenths; a full node lands in the last bucket.
    pub occupancy_histogram: [usize; 10],
    /// Largest relative gap between a stored radius and the recurrence over
    /// its immediate children.
    pub max_radius_residual: f64,
}

pub(crate) fn collect(tree: &TreeCore) -> TreeStats {
    let config = tree.config();
    let mut s = TreeStats {
        height: tree.height,
        nodes_per_level: vec![0; tree.height as usize + 1],
        ..Default::default()
    };
    let (mut fill_sum, mut leaf_fill_sum) = (0.0, 0.0);
    let mut stack = vec![tree.root];
    while let Some(page) = stack.pop() {
        let node = tree.store.get(page).expect("reachable pages are live");
        let fill = node.len() as f64 / config.capacity(node.kind()) as f64;
        s.nodes += 1;
        fill_sum += fill;
        if let Some(n) = s.nodes_per_level.get_mut(node.level as usize) {
            *n += 1;
        }
        s.occupancy_histogram[((fill * 10.0) as usize).min(9)] += 1;
        match &node.entries {
            Entries::Leaf(v) => {
                s.leaf_nodes += 1;
                s.objects += v.len();
                leaf_fill_sum += fill;
            }
            Entries::Internal(v) => stack.extend(v.iter().map(|e| e.child)),
        }
    }
    s.mean_occupancy = fill_sum / s.nodes as f64;
    s.mean_leaf_occupancy = leaf_fill_sum / s.leaf_nodes as f64;
    s.max_radius_residual = verify::verify(tree).max_radius_residual;
    s
}
