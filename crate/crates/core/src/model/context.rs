use std::sync::Arc;

use crate::graphs::{MultiTypedGraph, RelationGraph};
use crate::numerics::{SparseMatrix, Tensor};
use crate::temporal::TimeCodec;

/// Normalised operator and component labels of one relation graph.
#[derive(Clone, Debug)]
pub struct RelationContext {
    pub eta: Arc<SparseMatrix>,
    pub labels: Arc<[usize]>,
    pub component_count: usize,
    pub component_sizes: Vec<usize>,
}

impl RelationContext {
    pub fn new(graph: &RelationGraph) -> Self {
        RelationContext {
            eta: Arc::new(graph.normalize()),
            labels: graph.components().into(),
            component_count: graph.component_count(),
            component_sizes: graph.component_sizes(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }
}

/// Graph-derived constants of the forward pass, built once per dataset.
///
/// Per-edge temporal terms enter the user update as `sum_e (1/|N_jk|) b_e`
/// and are folded into `user_time` (likewise `item_time` with `1/|N_i|`), so
/// a layer costs `O(|E| d)` for message passing plus `O((I + JK) d^2)` for
/// the transforms.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub users: usize,
    pub items: usize,
    pub types: usize,
    pub dim: usize,
    /// `I x JK`, entry `1 / |N_j^k|` per edge.
    pub user_from_items: Arc<SparseMatrix>,
    /// `JK x I`, entry `1 / |N_i|` per edge.
    pub items_from_users: Arc<SparseMatrix>,
    /// `1 / |N_i|` with `|N| = 1` for isolated vertices, `I x 1`.
    pub user_self_scale: Tensor,
    pub item_self_scale: Tensor,
    pub user_time: Tensor,
    pub item_time: Tensor,
    /// `J x JK` sum-pooling of sub-vertices into items.
    pub type_pool: Arc<SparseMatrix>,
    pub social: Option<RelationContext>,
    pub item_graph: Option<RelationContext>,
}

impl GraphContext {
    /// `codec = None` disables temporal context.
    pub fn new(
        graph: &MultiTypedGraph,
        codec: Option<&TimeCodec>,
        dim: usize,
        social: Option<&RelationGraph>,
        item_graph: Option<&RelationGraph>,
    ) -> Self {
        let users = graph.user_count();
        let subs = graph.sub_vertex_count();
        let types = graph.type_count();
        let items = graph.item_count();
        let ud = graph.user_degrees();
        let vd = graph.sub_vertex_degrees();
        let inv = |d: usize| 1.0 / d.max(1) as f64;

        let user_from_items = SparseMatrix::from_triplets(
            users,
            subs,
            graph.edges().iter().map(|e| (e.user, e.sub_vertex, inv(vd[e.sub_vertex]))),
        )
        .expect("edges within graph bounds");
        let items_from_users = SparseMatrix::from_triplets(
            subs,
            users,
            graph.edges().iter().map(|e| (e.sub_vertex, e.user, inv(ud[e.user]))),
        )
        .expect("edges within graph bounds");

        let mut user_time = Tensor::zeros(users, dim);
        let mut item_time = Tensor::zeros(subs, dim);
        if let Some(codec) = codec {
            assert_eq!(codec.dim(), dim, "time embedding width must equal the layer width");
            let mut b = vec![0.0; dim];
            for e in graph.edges() {
                codec.embed_into(e.slot, &mut b);
                let cu = inv(vd[e.sub_vertex]);
                for (o, v) in user_time.row_mut(e.user).iter_mut().zip(&b) {
                    *o += cu * v;
                }
                let cv = inv(ud[e.user]);
                for (o, v) in item_time.row_mut(e.sub_vertex).iter_mut().zip(&b) {
                    *o += cv * v;
                }
            }
        }

        let type_pool = SparseMatrix::from_triplets(items, subs, (0..subs).map(|s| (s / types, s, 1.0)))
            .expect("pool indices in range");

        GraphContext {
            users,
            items,
            types,
            dim,
            user_from_items: Arc::new(user_from_items),
            items_from_users: Arc::new(items_from_users),
            user_self_scale: Tensor::col_vector(&ud.iter().map(|&d| inv(d)).collect::<Vec<_>>()),
            item_self_scale: Tensor::col_vector(&vd.iter().map(|&d| inv(d)).collect::<Vec<_>>()),
            user_time,
            item_time,
            type_pool: Arc::new(type_pool),
            social: social.map(RelationContext::new),
            item_graph: item_graph.map(RelationContext::new),
        }
    }
}
