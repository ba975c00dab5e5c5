//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation evaluates eagerly and appends a node to the [`Tape`].
//! [`Tape::backward`] walks the nodes in exact reverse order of execution and
//! accumulates gradients additively, so a value used twice receives the sum of
//! both contributions.
//!
//! ```
//! use kcgn::numerics::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let w = tape.param(Tensor::row_vector(&[0.0]));
//! let s = w.sigmoid();
//! let loss = s.mul(s).unwrap().sum();
//! let grads = tape.backward(loss).unwrap();
//! // d/dw sigmoid(w)^2 = 2 * 0.5 * 0.25 at w = 0
//! assert!((grads.wrt(w).get(0, 0) - 0.25).abs() < 1e-15);
//! ```

use std::cell::{Ref, RefCell};
use std::sync::Arc;

use super::{NumericsError, SparseMatrix, Tensor};

type NodeId = usize;

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    SpMM(Arc<SparseMatrix>, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    Log(NodeId),
    LogSigmoid(NodeId),
    Clamp(NodeId, f64, f64),
    ConcatCols(Vec<NodeId>),
    GatherRows(NodeId, Arc<[usize]>),
    ScatterAddRows(NodeId, Arc<[usize]>),
    SegmentMean(NodeId, Arc<[usize]>),
    RowDot(NodeId, NodeId),
    ScaleRows(NodeId, NodeId),
    GroupSoftmax(NodeId, usize),
    Sum(NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed operations.
///
/// A tape is single-owner: build it, call [`Tape::backward`] once per loss and
/// drop it. Frozen values can be copied out with [`Var::value`] and shared.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Gradient of `var`, or zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.id];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a trainable leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    pub fn value(&self, var: Var<'_>) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[var.id].value)
    }

    /// Propagates the gradient of a `1 x 1` loss to every node it depends on.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, NumericsError> {
        let nodes = self.nodes.borrow();
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.shape()).collect();
        let loss_node = &nodes[loss.id];
        if loss_node.value.shape() != (1, 1) {
            return Err(NumericsError::NonScalarLoss(loss_node.value.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn backprop(nodes: &[Node], node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let val = |i: NodeId| &nodes[i].value;
    let needs = |i: NodeId| nodes[i].requires_grad;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            if needs(*a) {
                accumulate(nodes, grads, *a, g.matmul_t(val(*b)));
            }
            if needs(*b) {
                accumulate(nodes, grads, *b, val(*a).t_matmul(g));
            }
        }
        Op::SpMM(s, x) => {
            accumulate(nodes, grads, *x, s.t_matmul_dense(g));
        }
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, g.clone());
            accumulate(nodes, grads, *b, g.clone());
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, g.clone());
            if needs(*b) {
                accumulate(nodes, grads, *b, g.map(|v| -v));
            }
        }
        Op::Mul(a, b) => {
            if needs(*a) {
                accumulate(nodes, grads, *a, zip_map(g, val(*b), |gv, bv| gv * bv));
            }
            if needs(*b) {
                accumulate(nodes, grads, *b, zip_map(g, val(*a), |gv, av| gv * av));
            }
        }
        Op::Scale(a, c) => accumulate(nodes, grads, *a, g.map(|v| v * c)),
        Op::LeakyRelu(a, slope) => {
            let d = zip_map(g, val(*a), |gv, x| if x > 0.0 { gv } else { gv * slope });
            accumulate(nodes, grads, *a, d);
        }
        Op::Sigmoid(a) => {
            let d = zip_map(g, &node.value, |gv, y| gv * y * (1.0 - y));
            accumulate(nodes, grads, *a, d);
        }
        Op::Log(a) => accumulate(nodes, grads, *a, zip_map(g, val(*a), |gv, x| gv / x)),
        Op::LogSigmoid(a) => {
            accumulate(nodes, grads, *a, zip_map(g, val(*a), |gv, x| gv * sigmoid(-x)));
        }
        Op::Clamp(a, lo, hi) => {
            let d = zip_map(g, val(*a), |gv, x| if x >= *lo && x <= *hi { gv } else { 0.0 });
            accumulate(nodes, grads, *a, d);
        }
        Op::ConcatCols(parts) => {
            let mut offset = 0;
            for &p in parts {
                let width = val(p).cols();
                if needs(p) {
                    let mut d = Tensor::zeros(g.rows(), width);
                    for r in 0..g.rows() {
                        d.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + width]);
                    }
                    accumulate(nodes, grads, p, d);
                }
                offset += width;
            }
        }
        Op::GatherRows(a, idx) => {
            let src = val(*a);
            let mut d = Tensor::zeros(src.rows(), src.cols());
            for (r, &i) in idx.iter().enumerate() {
                for (o, &gv) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                    *o += gv;
                }
            }
            accumulate(nodes, grads, *a, d);
        }
        Op::ScatterAddRows(a, idx) => {
            let src = val(*a);
            let mut d = Tensor::zeros(src.rows(), src.cols());
            for (r, &i) in idx.iter().enumerate() {
                d.row_mut(r).copy_from_slice(g.row(i));
            }
            accumulate(nodes, grads, *a, d);
        }
        Op::SegmentMean(a, labels) => {
            let src = val(*a);
            let counts = segment_counts(labels, node.value.rows());
            let mut d = Tensor::zeros(src.rows(), src.cols());
            for (r, &s) in labels.iter().enumerate() {
                let inv = 1.0 / counts[s] as f64;
                for (o, &gv) in d.row_mut(r).iter_mut().zip(g.row(s)) {
                    *o = gv * inv;
                }
            }
            accumulate(nodes, grads, *a, d);
        }
        Op::RowDot(a, b) => {
            let (va, vb) = (val(*a), val(*b));
            if needs(*a) {
                let mut d = Tensor::zeros(va.rows(), va.cols());
                for r in 0..va.rows() {
                    let gr = g.get(r, 0);
                    for (o, &bv) in d.row_mut(r).iter_mut().zip(vb.row(r)) {
                        *o = gr * bv;
                    }
                }
                accumulate(nodes, grads, *a, d);
            }
            if needs(*b) {
                let mut d = Tensor::zeros(vb.rows(), vb.cols());
                for r in 0..vb.rows() {
                    let gr = g.get(r, 0);
                    for (o, &av) in d.row_mut(r).iter_mut().zip(va.row(r)) {
                        *o = gr * av;
                    }
                }
                accumulate(nodes, grads, *b, d);
            }
        }
        Op::ScaleRows(x, s) => {
            let (vx, vs) = (val(*x), val(*s));
            if needs(*x) {
                let mut d = g.clone();
                for r in 0..d.rows() {
                    let sr = vs.get(r, 0);
                    d.row_mut(r).iter_mut().for_each(|v| *v *= sr);
                }
                accumulate(nodes, grads, *x, d);
            }
            if needs(*s) {
                let mut d = Tensor::zeros(vs.rows(), 1);
                for r in 0..vx.rows() {
                    d.set(r, 0, super::dot(g.row(r), vx.row(r)));
                }
                accumulate(nodes, grads, *s, d);
            }
        }
        Op::GroupSoftmax(a, group) => {
            let y = &node.value;
            let mut d = Tensor::zeros(y.rows(), 1);
            for start in (0..y.rows()).step_by(*group) {
                let span = start..start + group;
                let inner: f64 = span.clone().map(|r| g.get(r, 0) * y.get(r, 0)).sum();
                for r in span {
                    d.set(r, 0, y.get(r, 0) * (g.get(r, 0) - inner));
                }
            }
            accumulate(nodes, grads, *a, d);
        }
        Op::Sum(a) => {
            let (r, c) = val(*a).shape();
            accumulate(nodes, grads, *a, Tensor::filled(r, c, g.get(0, 0)));
        }
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let values = a.values().iter().zip(b.values()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), values).expect("same shape")
}

fn segment_counts(labels: &[usize], segments: usize) -> Vec<usize> {
    let mut counts = vec![0usize; segments];
    for &s in labels {
        counts[s] += 1;
    }
    counts
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Tensor {
        self.tape.value(*self).clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.value(*self).shape()
    }

    fn unary(self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'t> {
        let out = f(&self.tape.value(self));
        let rg = self.tape.needs(&[self.id]);
        self.tape.push(out, op, rg)
    }

    fn same_shape(self, other: Var<'t>, name: &'static str) -> Result<(), NumericsError> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(NumericsError::shape(name, a, b));
        }
        Ok(())
    }

    fn binary(self, other: Var<'t>, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'t> {
        let out = {
            let a = self.tape.value(self);
            let b = self.tape.value(other);
            zip_map(&a, &b, f)
        };
        let rg = self.tape.needs(&[self.id, other.id]);
        self.tape.push(out, op, rg)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let out = self.tape.value(self).matmul(&self.tape.value(other))?;
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(out, Op::MatMul(self.id, other.id), rg))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_shape(other, "add")?;
        Ok(self.binary(other, Op::Add(self.id, other.id), |a, b| a + b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_shape(other, "sub")?;
        Ok(self.binary(other, Op::Sub(self.id, other.id), |a, b| a - b))
    }

    /// Elementwise product.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_shape(other, "mul")?;
        Ok(self.binary(other, Op::Mul(self.id, other.id), |a, b| a * b))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), |t| t.map(|v| v * c))
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        self.unary(Op::LeakyRelu(self.id, slope), |t| t.map(|v| leaky_relu(v, slope)))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Op::Sigmoid(self.id), |t| t.map(sigmoid))
    }

    pub fn log(self) -> Var<'t> {
        self.unary(Op::Log(self.id), |t| t.map(f64::ln))
    }

    pub fn log_sigmoid(self) -> Var<'t> {
        self.unary(Op::LogSigmoid(self.id), |t| t.map(log_sigmoid))
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        self.unary(Op::Clamp(self.id, lo, hi), |t| t.map(|v| v.clamp(lo, hi)))
    }

    /// Sum of all entries as a `1 x 1` value.
    pub fn sum(self) -> Var<'t> {
        self.unary(Op::Sum(self.id), |t| Tensor::scalar(t.sum()))
    }

    /// `S * self` for a constant sparse `S`.
    pub fn spmm(self, s: &Arc<SparseMatrix>) -> Result<Var<'t>, NumericsError> {
        let out = s.matmul_dense(&self.tape.value(self))?;
        let rg = self.tape.needs(&[self.id]);
        Ok(self.tape.push(out, Op::SpMM(Arc::clone(s), self.id), rg))
    }

    /// Selects rows `indices[0], indices[1], ...` into a new matrix.
    pub fn gather_rows(self, indices: &Arc<[usize]>) -> Result<Var<'t>, NumericsError> {
        let out = {
            let src = self.tape.value(self);
            let mut out = Tensor::zeros(indices.len(), src.cols());
            for (r, &i) in indices.iter().enumerate() {
                if i >= src.rows() {
                    return Err(NumericsError::RowIndex { index: i, rows: src.rows() });
                }
                out.row_mut(r).copy_from_slice(src.row(i));
            }
            out
        };
        let rg = self.tape.needs(&[self.id]);
        Ok(self.tape.push(out, Op::GatherRows(self.id, Arc::clone(indices)), rg))
    }

    /// Adds row `r` of `self` into row `indices[r]` of an `out_rows`-row result.
    pub fn scatter_add_rows(self, indices: &Arc<[usize]>, out_rows: usize) -> Result<Var<'t>, NumericsError> {
        let out = {
            let src = self.tape.value(self);
            if indices.len() != src.rows() {
                return Err(NumericsError::shape("scatter_add_rows", src.shape(), (indices.len(), 1)));
            }
            let mut out = Tensor::zeros(out_rows, src.cols());
            for (r, &i) in indices.iter().enumerate() {
                if i >= out_rows {
                    return Err(NumericsError::RowIndex { index: i, rows: out_rows });
                }
                for (o, &v) in out.row_mut(i).iter_mut().zip(src.row(r)) {
                    *o += v;
                }
            }
            out
        };
        let rg = self.tape.needs(&[self.id]);
        Ok(self.tape.push(out, Op::ScatterAddRows(self.id, Arc::clone(indices)), rg))
    }

    /// Mean of the rows sharing each label. Labels must be `< segments`; a
    /// segment with no rows yields a zero row.
    pub fn segment_mean(self, labels: &Arc<[usize]>, segments: usize) -> Result<Var<'t>, NumericsError> {
        let out = {
            let src = self.tape.value(self);
            if labels.len() != src.rows() {
                return Err(NumericsError::shape("segment_mean", src.shape(), (labels.len(), 1)));
            }
            let mut out = Tensor::zeros(segments, src.cols());
            for (r, &s) in labels.iter().enumerate() {
                if s >= segments {
                    return Err(NumericsError::RowIndex { index: s, rows: segments });
                }
                for (o, &v) in out.row_mut(s).iter_mut().zip(src.row(r)) {
                    *o += v;
                }
            }
            for (s, &n) in segment_counts(labels, segments).iter().enumerate() {
                if n > 0 {
                    let inv = 1.0 / n as f64;
                    out.row_mut(s).iter_mut().for_each(|v| *v *= inv);
                }
            }
            out
        };
        let rg = self.tape.needs(&[self.id]);
        Ok(self.tape.push(out, Op::SegmentMean(self.id, Arc::clone(labels)), rg))
    }

    /// Inner product of matching rows, as an `n x 1` column.
    pub fn row_dot(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.same_shape(other, "row_dot")?;
        let out = {
            let a = self.tape.value(self);
            let b = self.tape.value(other);
            let col: Vec<f64> = (0..a.rows()).map(|r| super::dot(a.row(r), b.row(r))).collect();
            Tensor::col_vector(&col)
        };
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(out, Op::RowDot(self.id, other.id), rg))
    }

    /// Multiplies row `r` by `scales[r]`, where `scales` is `n x 1`.
    pub fn scale_rows(self, scales: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let (xs, ss) = (self.shape(), scales.shape());
        if ss != (xs.0, 1) {
            return Err(NumericsError::shape("scale_rows", xs, ss));
        }
        let out = {
            let mut x = self.tape.value(self).clone();
            let s = self.tape.value(scales);
            for r in 0..x.rows() {
                let sr = s.get(r, 0);
                x.row_mut(r).iter_mut().for_each(|v| *v *= sr);
            }
            x
        };
        let rg = self.tape.needs(&[self.id, scales.id]);
        Ok(self.tape.push(out, Op::ScaleRows(self.id, scales.id), rg))
    }

    /// Softmax over consecutive blocks of `group` entries of an `n x 1` column.
    pub fn group_softmax(self, group: usize) -> Result<Var<'t>, NumericsError> {
        let (rows, cols) = self.shape();
        if cols != 1 || group == 0 || rows % group != 0 {
            return Err(NumericsError::shape("group_softmax", (rows, cols), (group, 1)));
        }
        Ok(self.unary(Op::GroupSoftmax(self.id, group), |t| {
            let mut out = Tensor::zeros(rows, 1);
            for start in (0..rows).step_by(group) {
                let block = &t.values()[start..start + group];
                let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = block.iter().map(|v| (v - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                for (k, e) in exps.into_iter().enumerate() {
                    out.set(start + k, 0, e / z);
                }
            }
            out
        }))
    }

    /// Horizontal concatenation of equally tall matrices.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>, NumericsError> {
        let first = parts.first().ok_or(NumericsError::Empty("concat_cols"))?;
        let tape = first.tape;
        let rows = first.shape().0;
        let mut width = 0;
        for p in parts {
            let s = p.shape();
            if s.0 != rows {
                return Err(NumericsError::shape("concat_cols", first.shape(), s));
            }
            width += s.1;
        }
        let out = {
            let mut out = Tensor::zeros(rows, width);
            let mut offset = 0;
            for p in parts {
                let v = tape.value(*p);
                for r in 0..rows {
                    out.row_mut(r)[offset..offset + v.cols()].copy_from_slice(v.row(r));
                }
                offset += v.cols();
            }
            out
        };
        let ids: Vec<NodeId> = parts.iter().map(|p| p.id).collect();
        let rg = tape.needs(&ids);
        Ok(tape.push(out, Op::ConcatCols(ids), rg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn leaky_relu_and_sigmoid_values() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::row_vector(&[-1.0]));
        assert_eq!(x.leaky_relu(0.2).value().get(0, 0), -0.2);
        let z = tape.constant(Tensor::row_vector(&[0.0]));
        assert_eq!(z.sigmoid().value().get(0, 0), 0.5);
    }

    #[test]
    fn linear_loss_gradient_is_outer_product() {
        // loss = sum(W x): dW[i][j] = x[j]
        let tape = Tape::new();
        let w = tape.param(Tensor::from_rows(&[&[1.0, -2.0, 0.5], &[0.3, 0.0, 4.0]]));
        let x = tape.constant(Tensor::col_vector(&[2.0, -1.0, 3.0]));
        let loss = w.matmul(x).unwrap().sum();
        let g = tape.backward(loss).unwrap().wrt(w);
        assert_eq!(g, Tensor::from_rows(&[&[2.0, -1.0, 3.0], &[2.0, -1.0, 3.0]]));
    }

    #[test]
    fn unreachable_param_gets_zero_gradient() {
        let tape = Tape::new();
        let w = tape.param(Tensor::filled(2, 2, 1.0));
        let v = tape.param(Tensor::filled(1, 3, 1.0));
        let loss = v.sum();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(w).is_none());
        assert_eq!(grads.wrt(w), Tensor::zeros(2, 2));
    }

    #[test]
    fn sigmoid_squared_chain_rule() {
        let tape = Tape::new();
        let w = tape.param(Tensor::scalar(0.0));
        let s = w.sigmoid();
        let loss = s.mul(s).unwrap().sum();
        let g = tape.backward(loss).unwrap().wrt(w).get(0, 0);
        assert!(close(g, 0.25, 1e-15));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let tape = Tape::new();
        let w = tape.param(Tensor::zeros(2, 1));
        assert!(matches!(tape.backward(w), Err(NumericsError::NonScalarLoss((2, 1)))));
    }

    #[test]
    fn shared_use_accumulates() {
        // loss = sum(x + x) -> grad 2
        let tape = Tape::new();
        let x = tape.param(Tensor::row_vector(&[1.0, 2.0]));
        let loss = x.add(x).unwrap().sum();
        assert_eq!(tape.backward(loss).unwrap().wrt(x), Tensor::row_vector(&[2.0, 2.0]));
    }

    #[test]
    fn shape_errors_carry_both_shapes() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(3, 2));
        let err = a.add(b).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("3x2"), "{err}");
        assert!(a.matmul(a).is_err());
    }

    #[test]
    fn group_softmax_blocks_sum_to_one() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::col_vector(&[3f64.ln(), 0.0, 1.0, 1.0]));
        let y = x.group_softmax(2).unwrap().value();
        assert!(close(y.get(0, 0), 0.75, 1e-15));
        assert!(close(y.get(1, 0), 0.25, 1e-15));
        assert!(close(y.get(2, 0), 0.5, 1e-15));
    }

    #[test]
    fn constants_do_not_require_grad() {
        let tape = Tape::new();
        let c = tape.constant(Tensor::filled(1, 2, 3.0));
        let loss = c.sum();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(c).is_none());
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!(close(log_sigmoid(0.0), -(2f64.ln()), 1e-15));
        assert!(log_sigmoid(-800.0).is_finite());
        assert!(close(log_sigmoid(-800.0), -800.0, 1e-9));
        assert!(log_sigmoid(40.0) > -1e-17);
    }
}
