use rand::Rng as _;

use crate::numerics::{rng, Gradients, Tape, Tensor, Var};

/// Every trainable tensor of the model.
///
/// `w_neighbor[l]` transforms neighbour messages and `w_self[l]` the
/// self-propagated message of interaction layer `l`. `gate` is the query
/// vector of the type-fusion softmax, of length `(L + 1) * d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub user_embedding: Tensor,
    pub item_embedding: Tensor,
    pub w_neighbor: Vec<Tensor>,
    pub w_self: Vec<Tensor>,
    pub gate: Tensor,
}

/// Glorot-uniform bound for a `fan_in x fan_out` matrix.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(rows: usize, cols: usize, r: &mut rng::Rng) -> Tensor {
    let bound = glorot_bound(rows, cols);
    let values = (0..rows * cols).map(|_| r.gen_range(-bound..bound)).collect();
    Tensor::from_vec(rows, cols, values).expect("sized")
}

impl ModelParams {
    /// Seeded initialisation: Glorot-uniform tables and transforms, zero gate.
    pub fn init(users: usize, items: usize, types: usize, dim: usize, layers: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed, rng::streams::INIT);
        let user_embedding = glorot(users, dim, &mut r);
        let item_embedding = glorot(items * types, dim, &mut r);
        let mut w_neighbor = Vec::with_capacity(layers);
        let mut w_self = Vec::with_capacity(layers);
        for _ in 0..layers {
            w_neighbor.push(glorot(dim, dim, &mut r));
            w_self.push(glorot(dim, dim, &mut r));
        }
        ModelParams {
            user_embedding,
            item_embedding,
            w_neighbor,
            w_self,
            gate: Tensor::zeros((layers + 1) * dim, 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.user_embedding.cols()
    }

    pub fn layers(&self) -> usize {
        self.w_neighbor.len()
    }

    pub fn user_count(&self) -> usize {
        self.user_embedding.rows()
    }

    pub fn sub_vertex_count(&self) -> usize {
        self.item_embedding.rows()
    }

    /// Tensors in canonical order with stable names.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("user_embedding".to_string(), &self.user_embedding),
            ("item_embedding".to_string(), &self.item_embedding),
        ];
        for (l, (wn, ws)) in self.w_neighbor.iter().zip(&self.w_self).enumerate() {
            out.push((format!("w_neighbor.{l}"), wn));
            out.push((format!("w_self.{l}"), ws));
        }
        out.push(("gate".to_string(), &self.gate));
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    /// Mutable tensors, same order as [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.user_embedding, &mut self.item_embedding];
        for (wn, ws) in self.w_neighbor.iter_mut().zip(self.w_self.iter_mut()) {
            out.push(wn);
            out.push(ws);
        }
        out.push(&mut self.gate);
        out
    }

    /// Rebuilds parameters from tensors in canonical order.
    pub fn from_tensors(mut tensors: Vec<Tensor>) -> Option<Self> {
        if tensors.len() < 3 || !(tensors.len() - 3).is_multiple_of(2) {
            return None;
        }
        let gate = tensors.pop()?;
        let mut it = tensors.into_iter();
        let user_embedding = it.next()?;
        let item_embedding = it.next()?;
        let mut w_neighbor = Vec::new();
        let mut w_self = Vec::new();
        while let Some(wn) = it.next() {
            w_neighbor.push(wn);
            w_self.push(it.next()?);
        }
        Some(ModelParams {
            user_embedding,
            item_embedding,
            w_neighbor,
            w_self,
            gate,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.sum_squares()).sum()
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars {
            user_embedding: tape.param(self.user_embedding.clone()),
            item_embedding: tape.param(self.item_embedding.clone()),
            w_neighbor: self.w_neighbor.iter().map(|t| tape.param(t.clone())).collect(),
            w_self: self.w_self.iter().map(|t| tape.param(t.clone())).collect(),
            gate: tape.param(self.gate.clone()),
        }
    }
}

/// [`ModelParams`] recorded as tape leaves.
#[derive(Clone, Debug)]
pub struct ParamVars<'t> {
    pub user_embedding: Var<'t>,
    pub item_embedding: Var<'t>,
    pub w_neighbor: Vec<Var<'t>>,
    pub w_self: Vec<Var<'t>>,
    pub gate: Var<'t>,
}

impl<'t> ParamVars<'t> {
    /// Leaves in canonical order.
    pub fn all(&self) -> Vec<Var<'t>> {
        let mut out = vec![self.user_embedding, self.item_embedding];
        for (wn, ws) in self.w_neighbor.iter().zip(&self.w_self) {
            out.push(*wn);
            out.push(*ws);
        }
        out.push(self.gate);
        out
    }

    /// Rebinds an already-recorded list of leaves (canonical order).
    pub fn from_vars(vars: &[Var<'t>]) -> Self {
        let layers = (vars.len() - 3) / 2;
        ParamVars {
            user_embedding: vars[0],
            item_embedding: vars[1],
            w_neighbor: (0..layers).map(|l| vars[2 + 2 * l]).collect(),
            w_self: (0..layers).map(|l| vars[3 + 2 * l]).collect(),
            gate: vars[vars.len() - 1],
        }
    }

    pub fn gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.all().into_iter().map(|v| grads.wrt(v)).collect()
    }
}
