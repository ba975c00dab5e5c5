use std::collections::{BTreeSet, HashMap, VecDeque};

use log::warn;
use rand::seq::index::sample;

use super::{GraphError, InteractionRecord};
use crate::numerics::{rng, SparseMatrix};

/// Upper bound on edges contributed by one item category.
pub const DEFAULT_CATEGORY_EDGE_CAP: usize = 500;

/// Undirected, unweighted graph over users or items, with connected-component
/// labels computed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationGraph {
    adjacency: SparseMatrix,
    components: Vec<usize>,
    component_count: usize,
}

impl RelationGraph {
    /// Builds an undirected graph. Each input pair is stored in both
    /// directions; self-edges are dropped with a warning and repeated pairs
    /// collapse to one edge.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        let mut self_edges = 0usize;
        for &(a, b) in edges {
            if a >= nodes || b >= nodes {
                return Err(GraphError::EdgeOutOfRange { a, b, nodes });
            }
            if a == b {
                self_edges += 1;
                continue;
            }
            set.insert((a, b));
            set.insert((b, a));
        }
        if self_edges > 0 {
            warn!("dropped {self_edges} self-edge(s)");
        }
        let adjacency = SparseMatrix::from_triplets(nodes, nodes, set.into_iter().map(|(a, b)| (a, b, 1.0)))
            .expect("validated indices");
        let (components, component_count) = label_components(&adjacency);
        Ok(RelationGraph {
            adjacency,
            components,
            component_count,
        })
    }

    pub fn edgeless(nodes: usize) -> Self {
        RelationGraph::from_edges(nodes, &[]).expect("no edges")
    }

    /// User–user graph from (possibly one-way) social ties.
    pub fn social(user_edges: &[(usize, usize)], users: usize) -> Result<Self, GraphError> {
        RelationGraph::from_edges(users, user_edges)
    }

    /// Item graph linking items that share a category.
    ///
    /// A category whose full clique would exceed `edge_cap` edges instead
    /// links every member to a seeded sample of `max(1, edge_cap / members)`
    /// hub members, which keeps the category connected with at most
    /// `edge_cap` edges.
    pub fn item_categories(
        item_categories: &[(usize, usize)],
        items: usize,
        edge_cap: usize,
        seed: u64,
    ) -> Result<Self, GraphError> {
        let mut members: HashMap<usize, BTreeSet<usize>> = HashMap::new();
        for &(item, category) in item_categories {
            if item >= items {
                return Err(GraphError::UnknownItem { item, items });
            }
            members.entry(category).or_default().insert(item);
        }
        let mut categories: Vec<_> = members.into_iter().collect();
        categories.sort_by_key(|(c, _)| *c);

        let mut edges = Vec::new();
        for (category, set) in categories {
            let list: Vec<usize> = set.into_iter().collect();
            let m = list.len();
            if m * m.saturating_sub(1) / 2 <= edge_cap {
                for a in 0..m {
                    for b in a + 1..m {
                        edges.push((list[a], list[b]));
                    }
                }
                continue;
            }
            let hubs = (edge_cap / m).max(1).min(m);
            let mut r = rng::keyed(seed, rng::streams::ITEM_GRAPH, category as u64);
            let mut hub_pos = sample(&mut r, m, hubs).into_vec();
            hub_pos.sort_unstable();
            for &h in &hub_pos {
                for (pos, &item) in list.iter().enumerate() {
                    if pos != h {
                        edges.push((list[h], item));
                    }
                }
            }
        }
        RelationGraph::from_edges(items, &edges)
    }

    /// Item graph linking `j` and `j'` when at least `min_common_users` users
    /// interacted with both under one and the same type.
    pub fn item_cointeraction(
        records: &[InteractionRecord],
        items: usize,
        min_common_users: usize,
    ) -> Result<Self, GraphError> {
        if min_common_users == 0 {
            return Err(GraphError::Threshold);
        }
        for r in records {
            if r.item >= items {
                return Err(GraphError::UnknownItem { item: r.item, items });
            }
        }
        let mut by_user_type: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
        for r in records {
            by_user_type.entry((r.user, r.kind)).or_default().insert(r.item);
        }
        let mut per_user: HashMap<usize, BTreeSet<(usize, usize)>> = HashMap::new();
        for ((user, _), set) in &by_user_type {
            let list: Vec<usize> = set.iter().copied().collect();
            let pairs = per_user.entry(*user).or_default();
            for a in 0..list.len() {
                for b in a + 1..list.len() {
                    pairs.insert((list[a], list[b]));
                }
            }
        }
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for pairs in per_user.values() {
            for &p in pairs {
                *counts.entry(p).or_default() += 1;
            }
        }
        let mut edges: Vec<(usize, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_common_users)
            .map(|(p, _)| p)
            .collect();
        edges.sort_unstable();
        RelationGraph::from_edges(items, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        self.adjacency.row(node).0
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Undirected edges `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency.iter().filter(|&(a, b, _)| a < b).map(|(a, b, _)| (a, b)).collect()
    }

    /// Component label per node. Labels are dense, numbered in order of each
    /// component's lowest node id.
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.component_count];
        for &c in &self.components {
            sizes[c] += 1;
        }
        sizes
    }

    /// Symmetric normalisation `D^-1/2 (A + I) D^-1/2`, with `D` the degree
    /// matrix of `A + I`. Isolated nodes map to a unit self-loop.
    pub fn normalize(&self) -> SparseMatrix {
        let n = self.node_count();
        let deg: Vec<f64> = (0..n)
            .map(|i| {
                let (_, vals) = self.adjacency.row(i);
                1.0 + vals.iter().sum::<f64>()
            })
            .collect();
        let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
        let triplets = self
            .adjacency
            .iter()
            .chain((0..n).map(|i| (i, i, 1.0)))
            .map(|(a, b, v)| (a, b, v * inv_sqrt[a] * inv_sqrt[b]));
        SparseMatrix::from_triplets(n, n, triplets).expect("indices within adjacency bounds")
    }
}

fn label_components(adj: &SparseMatrix) -> (Vec<usize>, usize) {
    let n = adj.rows();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in adj.row(u).0 {
                if labels[v] == usize::MAX {
                    labels[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    (labels, next)
}
