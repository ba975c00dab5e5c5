use std::sync::Arc;

use super::*;
use crate::graphs::{InteractionRecord, MultiTypedGraph, RelationGraph};
use crate::numerics::{SparseMatrix, Tape, Tensor};
use crate::temporal::{TimeCodec, DAY_SECONDS};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn context(records: &[InteractionRecord], users: usize, items: usize, types: usize, dim: usize) -> GraphContext {
    let codec = TimeCodec::new(0, DAY_SECONDS, 2).unwrap();
    let g = MultiTypedGraph::build(records, users, items, types, &codec).unwrap();
    GraphContext::new(&g, None, dim, None, None)
}

#[test]
fn single_edge_layer_hand_value() {
    let ctx = context(&[InteractionRecord::new(0, 0, 0, 0)], 1, 1, 1, 2);
    let tape = Tape::new();
    let hu = tape.constant(Tensor::row_vector(&[1.0, 0.0]));
    let hv = tape.constant(Tensor::row_vector(&[0.0, 1.0]));
    let eye = tape.constant(Tensor::identity(2));
    let (u, v) = propagate_layer(hu, hv, &ctx, eye, eye, 0.2).unwrap();
    assert_eq!(u.value(), Tensor::row_vector(&[1.0, 1.0]));
    assert_eq!(v.value(), Tensor::row_vector(&[1.0, 1.0]));
}

#[test]
fn edgeless_layer_is_self_propagation() {
    let ctx = context(&[], 2, 1, 1, 2);
    let tape = Tape::new();
    let hu = tape.constant(Tensor::from_rows(&[&[1.0, -2.0], &[-0.5, 3.0]]));
    let hv = tape.constant(Tensor::row_vector(&[0.3, 0.3]));
    let eye = tape.constant(Tensor::identity(2));
    let (u, _) = propagate_layer(hu, hv, &ctx, eye, eye, 0.2).unwrap();
    assert_eq!(u.value(), Tensor::from_rows(&[&[1.0, -0.4], &[-0.1, 3.0]]));
}

#[test]
fn degree_factors_follow_factored_form() {
    // user 0 has four neighbours, each sub-vertex has one user.
    let recs: Vec<_> = (0..4).map(|j| InteractionRecord::new(0, j, 0, 0)).collect();
    let ctx = context(&recs, 1, 4, 1, 1);
    let tape = Tape::new();
    let hu = tape.constant(Tensor::scalar(8.0));
    let hv = tape.constant(Tensor::col_vector(&[1.0, 2.0, 3.0, 4.0]));
    let one = tape.constant(Tensor::scalar(1.0));
    let (u, v) = propagate_layer(hu, hv, &ctx, one, one, 0.2).unwrap();
    // self 8/4, neighbours 1+2+3+4 each scaled by 1/1
    assert!(close(u.value().get(0, 0), 2.0 + 10.0));
    // item side: own value / 1 plus user 8 scaled by 1/|N_i| = 1/4
    assert!(close(v.value().get(2, 0), 3.0 + 2.0));
}

#[test]
fn encoder_widths_and_zero_fixpoint() {
    let recs = [InteractionRecord::new(0, 0, 0, 0), InteractionRecord::new(1, 1, 1, 0)];
    let ctx = context(&recs, 2, 2, 2, 2);
    for (layers, width) in [(0usize, 2usize), (2, 6)] {
        let p = ModelParams::init(2, 2, 2, 2, layers, 3);
        let tape = Tape::new();
        let vars = p.bind(&tape);
        let (_, _, us, ss) = encode_interactions(&vars, &ctx, 0.2).unwrap();
        assert_eq!(us.shape(), (2, width));
        assert_eq!(ss.shape(), (4, width));
        if layers == 0 {
            assert_eq!(us.value(), p.user_embedding);
        }
    }
    let mut p = ModelParams::init(2, 2, 2, 2, 2, 3);
    p.user_embedding = Tensor::zeros(2, 2);
    p.item_embedding = Tensor::zeros(4, 2);
    let tape = Tape::new();
    let (_, _, us, ss) = encode_interactions(&p.bind(&tape), &ctx, 0.2).unwrap();
    assert!(us.value().values().iter().all(|&v| v == 0.0));
    assert!(ss.value().values().iter().all(|&v| v == 0.0));
}

#[test]
fn gated_fusion_examples() {
    let pool = |items: usize, types: usize| {
        Arc::new(SparseMatrix::from_triplets(items, items * types, (0..items * types).map(|s| (s / types, s, 1.0))).unwrap())
    };
    let tape = Tape::new();
    // q = 0: uniform mean
    let subs = tape.constant(Tensor::from_rows(&[&[1.0, 0.0], &[3.0, 2.0]]));
    let zero = tape.constant(Tensor::zeros(2, 1));
    let (fused, gates) = gated_fusion(subs, zero, &pool(1, 2), 2).unwrap();
    assert_eq!(fused.value(), Tensor::row_vector(&[2.0, 1.0]));
    assert_eq!(gates.value(), Tensor::col_vector(&[0.5, 0.5]));
    // K = 1: identity
    let q = tape.constant(Tensor::col_vector(&[0.7, -0.2]));
    let (fused, _) = gated_fusion(subs, q, &pool(2, 1), 1).unwrap();
    assert_eq!(fused.value(), subs.value());
    // logits (ln 3, 0) -> gates (0.75, 0.25)
    let subs = tape.constant(Tensor::from_rows(&[&[3f64.ln()], &[0.0]]));
    let q = tape.constant(Tensor::scalar(1.0));
    let (_, gates) = gated_fusion(subs, q, &pool(1, 2), 2).unwrap();
    assert!(close(gates.value().get(0, 0), 0.75));
    assert!(close(gates.value().get(1, 0), 0.25));
}

#[test]
fn relational_propagation_examples() {
    let tape = Tape::new();
    let single = Arc::new(RelationGraph::edgeless(1).normalize());
    let z = relational_propagate(tape.constant(Tensor::scalar(-1.0)), &single, 1, 0.2).unwrap();
    assert!(close(z.value().get(0, 0), -0.2));

    let path = Arc::new(RelationGraph::from_edges(2, &[(0, 1)]).unwrap().normalize());
    let z = relational_propagate(tape.constant(Tensor::from_rows(&[&[0.4, -1.0], &[0.4, -1.0]])), &path, 3, 0.2).unwrap();
    assert_eq!(z.value().row(0), z.value().row(1));

    let tri = Arc::new(RelationGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap().normalize());
    let z0 = Tensor::from_rows(&[&[1.0, -3.0], &[2.0, 0.5], &[-6.0, 1.0]]);
    let z = relational_propagate(tape.constant(z0), &tri, 1, 0.2).unwrap().value();
    let expected = [(1.0 + 2.0 - 6.0) / 3.0 * 0.2, (-3.0 + 0.5 + 1.0) / 3.0 * 0.2];
    for r in 0..3 {
        assert!(close(z.get(r, 0), expected[0]) && close(z.get(r, 1), expected[1]));
    }
}

#[test]
fn readout_examples() {
    let tape = Tape::new();
    let z = tape.constant(Tensor::from_rows(&[&[1.0, 3.0], &[3.0, 1.0], &[5.0, 7.0]]));
    let labels: Arc<[usize]> = vec![0, 0, 1].into();
    let f = readout(z, &labels, 2).unwrap().value();
    assert_eq!(f, Tensor::from_rows(&[&[2.0, 2.0], &[5.0, 7.0]]));
}

#[test]
fn discriminator_and_score_examples() {
    assert_eq!(discriminate(&[1.0, 0.0], &[0.0, 1.0]), 0.5);
    assert!((discriminate(&[1.0; 4], &[1.0; 4]) - 0.982_013_790_037_908_5).abs() < 1e-15);
    assert!((discriminate(&[-1.0], &[1.0]) - 0.268_941_421_369_995_1).abs() < 1e-15);
    assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
    assert_eq!(score(&[0.6, 0.8], &[0.6, 0.8]), 1.0);
    assert_eq!(score(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
}
