//! Graph construction: the multi-typed user–item graph and the two relation
//! graphs (user social ties, item inter-dependencies).

mod multityped;
mod relation;

use thiserror::Error;

pub use multityped::{MultiTypedGraph, TypedEdge};
pub use relation::{RelationGraph, DEFAULT_CATEGORY_EDGE_CAP};

/// One observed `(user, item, type, timestamp)` event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InteractionRecord {
    pub user: usize,
    pub item: usize,
    pub kind: usize,
    pub timestamp: i64,
}

impl InteractionRecord {
    pub fn new(user: usize, item: usize, kind: usize, timestamp: i64) -> Self {
        InteractionRecord { user, item, kind, timestamp }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("record {index}: {field} {value} out of range (< {bound} required)")]
    OutOfRange {
        index: usize,
        field: &'static str,
        value: usize,
        bound: usize,
    },
    #[error("record {index}: negative timestamp {timestamp}")]
    NegativeTimestamp { index: usize, timestamp: i64 },
    #[error("edge ({a}, {b}) references a node outside 0..{nodes}")]
    EdgeOutOfRange { a: usize, b: usize, nodes: usize },
    #[error("unknown item id {item} (catalogue has {items} items)")]
    UnknownItem { item: usize, items: usize },
    #[error("graph dimensions must be positive: {0}")]
    EmptyDimension(&'static str),
    #[error("co-interaction threshold must be at least 1")]
    Threshold,
}

/// Checks every record against the `users x items x types` bounds.
pub fn validate_records(
    records: &[InteractionRecord],
    users: usize,
    items: usize,
    types: usize,
) -> Result<(), GraphError> {
    for (index, r) in records.iter().enumerate() {
        for (field, value, bound) in [("user", r.user, users), ("item", r.item, items), ("type", r.kind, types)] {
            if value >= bound {
                return Err(GraphError::OutOfRange { index, field, value, bound });
            }
        }
        if r.timestamp < 0 {
            return Err(GraphError::NegativeTimestamp {
                index,
                timestamp: r.timestamp,
            });
        }
    }
    Ok(())
}
