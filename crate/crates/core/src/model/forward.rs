use std::sync::Arc;

use super::{GraphContext, ModelConfig, ParamVars, ScoreStage};
use crate::numerics::{dot, sigmoid, NumericsError, SparseMatrix, Tape, Var};

/// All intermediate states of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput<'t> {
    /// `H_u^(0..=L)`, each `I x d`.
    pub user_layers: Vec<Var<'t>>,
    /// `H_v^(0..=L)` over sub-vertices, each `JK x d`.
    pub sub_layers: Vec<Var<'t>>,
    /// `I x (L+1)d`.
    pub user_star: Var<'t>,
    /// `JK x (L+1)d`.
    pub sub_star: Var<'t>,
    /// Gate-fused items, `J x (L+1)d`.
    pub item_star: Var<'t>,
    /// Fusion weights, `JK x 1`.
    pub gates: Var<'t>,
    /// After social propagation (equals `user_star` when the social graph is off).
    pub z_user: Var<'t>,
    /// After item-graph propagation (equals `item_star` when the item graph is off).
    pub z_item: Var<'t>,
}

impl<'t> ForwardOutput<'t> {
    pub fn scoring_users(&self, stage: ScoreStage) -> Var<'t> {
        match stage {
            ScoreStage::Propagated => self.z_user,
            ScoreStage::Encoded => self.user_star,
        }
    }

    pub fn scoring_items(&self, stage: ScoreStage) -> Var<'t> {
        match stage {
            ScoreStage::Propagated => self.z_item,
            ScoreStage::Encoded => self.item_star,
        }
    }
}

/// One interaction layer:
///
/// ```text
/// H_u' = LeakyReLU( diag(1/|N_i|) H_u W_self + (S_u H_v + T_u) W_neighbor )
/// H_v' = LeakyReLU( diag(1/|N_jk|) H_v W_self + (S_v H_u + T_v) W_neighbor )
/// ```
///
/// where `S_u[i, jk] = 1/|N_jk|`, `S_v[jk, i] = 1/|N_i|` on edges and `T`
/// holds the degree-weighted sums of edge time embeddings.
pub fn propagate_layer<'t>(
    h_user: Var<'t>,
    h_sub: Var<'t>,
    ctx: &GraphContext,
    w_neighbor: Var<'t>,
    w_self: Var<'t>,
    slope: f64,
) -> Result<(Var<'t>, Var<'t>), NumericsError> {
    let tape = h_user.tape();
    let user_scale = tape.constant(ctx.user_self_scale.clone());
    let item_scale = tape.constant(ctx.item_self_scale.clone());
    let user_time = tape.constant(ctx.user_time.clone());
    let item_time = tape.constant(ctx.item_time.clone());

    let user_self = h_user.scale_rows(user_scale)?.matmul(w_self)?;
    let user_msg = h_sub.spmm(&ctx.user_from_items)?.add(user_time)?.matmul(w_neighbor)?;
    let next_user = user_self.add(user_msg)?.leaky_relu(slope);

    let item_self = h_sub.scale_rows(item_scale)?.matmul(w_self)?;
    let item_msg = h_user.spmm(&ctx.items_from_users)?.add(item_time)?.matmul(w_neighbor)?;
    let next_sub = item_self.add(item_msg)?.leaky_relu(slope);

    Ok((next_user, next_sub))
}

/// Runs the `L` interaction layers and concatenates every layer's state.
/// Returns `(user_layers, sub_layers, user_star, sub_star)`.
#[allow(clippy::type_complexity)]
pub fn encode_interactions<'t>(
    params: &ParamVars<'t>,
    ctx: &GraphContext,
    slope: f64,
) -> Result<(Vec<Var<'t>>, Vec<Var<'t>>, Var<'t>, Var<'t>), NumericsError> {
    let mut users = vec![params.user_embedding];
    let mut subs = vec![params.item_embedding];
    for (wn, ws) in params.w_neighbor.iter().zip(&params.w_self) {
        let (u, v) = propagate_layer(*users.last().unwrap(), *subs.last().unwrap(), ctx, *wn, *ws, slope)?;
        users.push(u);
        subs.push(v);
    }
    let user_star = if users.len() == 1 { users[0] } else { Var::concat_cols(&users)? };
    let sub_star = if subs.len() == 1 { subs[0] } else { Var::concat_cols(&subs)? };
    Ok((users, subs, user_star, sub_star))
}

/// Softmax gate over the `K` sub-vertices of each item:
/// `g_jk = softmax_k(q . h_jk)`, `h_j = sum_k g_jk h_jk`.
/// Returns `(fused, gates)`.
pub fn gated_fusion<'t>(
    sub_star: Var<'t>,
    gate: Var<'t>,
    pool: &Arc<SparseMatrix>,
    types: usize,
) -> Result<(Var<'t>, Var<'t>), NumericsError> {
    let logits = sub_star.matmul(gate)?;
    let gates = logits.group_softmax(types)?;
    let fused = sub_star.scale_rows(gates)?.spmm(pool)?;
    Ok((fused, gates))
}

/// `Z <- LeakyReLU(eta Z)`, `layers` times. No trainable weights.
pub fn relational_propagate<'t>(
    z0: Var<'t>,
    eta: &Arc<SparseMatrix>,
    layers: usize,
    slope: f64,
) -> Result<Var<'t>, NumericsError> {
    let mut z = z0;
    for _ in 0..layers {
        z = z.spmm(eta)?.leaky_relu(slope);
    }
    Ok(z)
}

/// Mean-pooled summary per connected component, `components x width`.
pub fn readout<'t>(z: Var<'t>, labels: &Arc<[usize]>, components: usize) -> Result<Var<'t>, NumericsError> {
    z.segment_mean(labels, components)
}

/// Discriminator probability `sigmoid(z . f)`.
pub fn discriminate(z: &[f64], f: &[f64]) -> f64 {
    assert_eq!(z.len(), f.len(), "discriminator operands differ in width");
    sigmoid(dot(z, f))
}

/// Predicted preference: plain inner product.
pub fn score(user: &[f64], item: &[f64]) -> f64 {
    assert_eq!(user.len(), item.len(), "score operands differ in width");
    dot(user, item)
}

/// Full forward pass.
pub fn forward<'t>(params: &ParamVars<'t>, ctx: &GraphContext, cfg: &ModelConfig) -> Result<ForwardOutput<'t>, NumericsError> {
    let (user_layers, sub_layers, user_star, sub_star) = encode_interactions(params, ctx, cfg.slope)?;
    let (item_star, gates) = gated_fusion(sub_star, params.gate, &ctx.type_pool, ctx.types)?;
    let z_user = match &ctx.social {
        Some(rel) => relational_propagate(user_star, &rel.eta, cfg.relation_layers, cfg.slope)?,
        None => user_star,
    };
    let z_item = match &ctx.item_graph {
        Some(rel) => relational_propagate(item_star, &rel.eta, cfg.relation_layers, cfg.slope)?,
        None => item_star,
    };
    Ok(ForwardOutput {
        user_layers,
        sub_layers,
        user_star,
        sub_star,
        item_star,
        gates,
        z_user,
        z_item,
    })
}

/// Convenience for tests and inference: a fresh tape holding `params`.
pub fn with_forward<R>(
    params: &super::ModelParams,
    ctx: &GraphContext,
    cfg: &ModelConfig,
    f: impl for<'t> FnOnce(&'t Tape, &ForwardOutput<'t>) -> R,
) -> Result<R, NumericsError> {
    let tape = Tape::new();
    let vars = params.bind(&tape);
    let out = forward(&vars, ctx, cfg)?;
    Ok(f(&tape, &out))
}
