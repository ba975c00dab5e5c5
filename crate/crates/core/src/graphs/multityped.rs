use std::collections::BTreeMap;

use super::{validate_records, GraphError, InteractionRecord};
use crate::temporal::TimeCodec;

/// Edge between user `user` and item sub-vertex `sub_vertex = item * K + type`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TypedEdge {
    pub user: usize,
    pub sub_vertex: usize,
    pub slot: u64,
}

/// Bipartite graph over `I` users and `J * K` type-specific item sub-vertices.
///
/// Edges are sorted by `(user, sub_vertex)` and unique; a repeated
/// `(user, item, type)` keeps its latest timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTypedGraph {
    user_count: usize,
    item_count: usize,
    type_count: usize,
    edges: Vec<TypedEdge>,
    user_degree: Vec<usize>,
    sub_vertex_degree: Vec<usize>,
}

impl MultiTypedGraph {
    pub fn build(
        records: &[InteractionRecord],
        users: usize,
        items: usize,
        types: usize,
        codec: &TimeCodec,
    ) -> Result<Self, GraphError> {
        if users == 0 {
            return Err(GraphError::EmptyDimension("users"));
        }
        if items == 0 {
            return Err(GraphError::EmptyDimension("items"));
        }
        if types == 0 {
            return Err(GraphError::EmptyDimension("types"));
        }
        validate_records(records, users, items, types)?;

        let mut latest: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for r in records {
            let key = (r.user, r.item * types + r.kind);
            latest
                .entry(key)
                .and_modify(|t| *t = (*t).max(r.timestamp))
                .or_insert(r.timestamp);
        }

        let mut user_degree = vec![0; users];
        let mut sub_vertex_degree = vec![0; items * types];
        let edges: Vec<TypedEdge> = latest
            .into_iter()
            .map(|((user, sub_vertex), ts)| {
                user_degree[user] += 1;
                sub_vertex_degree[sub_vertex] += 1;
                TypedEdge {
                    user,
                    sub_vertex,
                    slot: codec.slot_of(ts),
                }
            })
            .collect();

        Ok(MultiTypedGraph {
            user_count: users,
            item_count: items,
            type_count: types,
            edges,
            user_degree,
            sub_vertex_degree,
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn sub_vertex_count(&self) -> usize {
        self.item_count * self.type_count
    }

    pub fn vertex_count(&self) -> usize {
        self.user_count + self.sub_vertex_count()
    }

    pub fn sub_vertex(&self, item: usize, kind: usize) -> usize {
        item * self.type_count + kind
    }

    /// `(item, type)` of a sub-vertex.
    pub fn split_sub_vertex(&self, sub_vertex: usize) -> (usize, usize) {
        (sub_vertex / self.type_count, sub_vertex % self.type_count)
    }

    pub fn edges(&self) -> &[TypedEdge] {
        &self.edges
    }

    /// `|N_i|` for every user.
    pub fn user_degrees(&self) -> &[usize] {
        &self.user_degree
    }

    /// `|N_j^k|` for every sub-vertex.
    pub fn sub_vertex_degrees(&self) -> &[usize] {
        &self.sub_vertex_degree
    }
}
