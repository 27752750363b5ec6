//! A paged metric-space index.
//!
//! Two tree variants share one page store, node model and query engine and
//! are chosen by name at runtime:
//!
//! * `sm`, the symmetric M-tree. Every covering radius equals the
//!   recurrence over the node's immediate children, which lets inserts and
//!   deletes both run in O(h) and lets underflowing nodes merge.
//! * `classic`, the original M-tree insert, which widens radii on the way
//!   down and supports no delete.
//!
//! ```
//! use smtree::{DataObject, Tree};
//!
//! let mut tree = Tree::symmetric(2).unwrap();
//! let mut v = vec![0.0; 20];
//! v[0] = 0.5;
//! tree.insert(DataObject::new(1, v.clone())).unwrap();
//! let hits = tree.knn_query(&v.into(), 1).unwrap();
//! assert_eq!(hits.ids(), vec![1]);
//! ```

pub mod classic;
pub mod datagen;
pub mod error;
pub mod metric;
pub mod node;
pub mod oracle;
pub mod page;
pub mod search;
pub mod split;
pub mod stats;
pub mod symmetric;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use metric::{DataObject, Metric, Vector};
pub use page::{IoLedger, PageConfig, PageId, PageStore};
pub use search::{Hit, Query, QueryOutcome, QueryStats};
pub use stats::TreeStats;
pub use tree::{Tree, TreeConfig, TreeCore, TreeVariant};
pub use verify::{VerifyReport, Violation, ViolationKind};
