use std::sync::Arc;

use super::BprTriple;
use crate::model::{ForwardOutput, ParamVars, RelationContext, ScoreStage};
use crate::numerics::{log_sigmoid, NumericsError, Var};

/// Probabilities entering a logarithm in the mutual-information term are
/// clamped into `[MI_EPS, 1 - MI_EPS]`.
pub const MI_EPS: f64 = 1e-12;

/// Single-triple pairwise loss `-ln sigmoid(x_pos - x_neg)`.
pub fn bpr_term(positive_score: f64, negative_score: f64) -> f64 {
    -log_sigmoid(positive_score - negative_score)
}

/// Summed pairwise loss over a batch of triples, on the tape.
pub fn bpr_loss<'t>(users: Var<'t>, items: Var<'t>, triples: &[BprTriple]) -> Result<Var<'t>, NumericsError> {
    let idx = |f: fn(&BprTriple) -> usize| -> Arc<[usize]> { triples.iter().map(f).collect() };
    let u = users.gather_rows(&idx(|t| t.user))?;
    let pos = items.gather_rows(&idx(|t| t.positive))?;
    let neg = items.gather_rows(&idx(|t| t.negative))?;
    let margin = u.row_dot(pos)?.sub(u.row_dot(neg)?)?;
    Ok(margin.log_sigmoid().sum().scale(-1.0))
}

/// Discriminator logits for one relation graph: true pairs `z_i . f_c(i)`
/// and corrupted pairs `z_perm(i) . f_c(i)`, over nodes of non-singleton
/// components. `None` when every component is a singleton.
pub fn mi_logits<'t>(
    z: Var<'t>,
    rel: &RelationContext,
    permutation: &[usize],
) -> Result<Option<(Var<'t>, Var<'t>)>, NumericsError> {
    let selected: Vec<usize> = (0..rel.labels.len())
        .filter(|&i| rel.component_sizes[rel.labels[i]] > 1)
        .collect();
    if selected.is_empty() {
        return Ok(None);
    }
    let summaries = z.segment_mean(&rel.labels, rel.component_count)?;
    let nodes: Arc<[usize]> = selected.clone().into();
    let shuffled: Arc<[usize]> = selected.iter().map(|&i| permutation[i]).collect();
    let owners: Arc<[usize]> = selected.iter().map(|&i| rel.labels[i]).collect();
    let f = summaries.gather_rows(&owners)?;
    let positive = z.gather_rows(&nodes)?.row_dot(f)?;
    let negative = z.gather_rows(&shuffled)?.row_dot(f)?;
    Ok(Some((positive, negative)))
}

/// `-(weight / (N+ + N-)) [sum ln D(pos) + sum ln (1 - D(neg))]` with the
/// discriminator probability clamped away from 0 and 1.
pub fn mi_term<'t>(positive: Var<'t>, negative: Var<'t>, weight: f64) -> Var<'t> {
    let n = (positive.shape().0 + negative.shape().0) as f64;
    let hi = 1.0 - MI_EPS;
    let pos = positive.sigmoid().clamp(MI_EPS, hi).log().sum();
    // 1 - sigmoid(x) == sigmoid(-x)
    let neg = negative.scale(-1.0).sigmoid().clamp(MI_EPS, hi).log().sum();
    let total = pos.add(neg).expect("scalars");
    total.scale(-weight / n)
}

fn scalar(v: Var<'_>) -> f64 {
    v.value().item().expect("scalar loss term")
}

/// Weights of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub l2: f64,
    pub mi_user: f64,
    pub mi_item: f64,
}

/// Scalar values of each loss term for reporting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub bpr: f64,
    pub l2: f64,
    pub mi: f64,
    pub total: f64,
}

impl LossParts {
    pub fn is_finite(&self) -> bool {
        self.bpr.is_finite() && self.l2.is_finite() && self.mi.is_finite() && self.total.is_finite()
    }
}

/// Row permutations used for the discriminator's corrupted pairs. `None`
/// disables that side's mutual-information term.
#[derive(Clone, Debug, Default)]
pub struct Corruption {
    pub users: Option<Vec<usize>>,
    pub items: Option<Vec<usize>>,
}

/// Pairwise loss + L2 over every parameter + mutual-information terms.
#[allow(clippy::too_many_arguments)]
pub fn total_loss<'t>(
    params: &ParamVars<'t>,
    out: &ForwardOutput<'t>,
    social: Option<&RelationContext>,
    item_graph: Option<&RelationContext>,
    triples: &[BprTriple],
    corruption: &Corruption,
    stage: ScoreStage,
    weights: &LossWeights,
) -> Result<(Var<'t>, LossParts), NumericsError> {
    let mut total = bpr_loss(out.scoring_users(stage), out.scoring_items(stage), triples)?;
    let mut parts = LossParts {
        bpr: scalar(total),
        ..LossParts::default()
    };

    if weights.l2 > 0.0 {
        let mut reg: Option<Var<'t>> = None;
        for p in params.all() {
            let sq = p.mul(p)?.sum();
            reg = Some(match reg {
                Some(r) => r.add(sq)?,
                None => sq,
            });
        }
        if let Some(reg) = reg {
            let reg = reg.scale(weights.l2);
            parts.l2 = scalar(reg);
            total = total.add(reg)?;
        }
    }

    let sides = [
        (out.z_user, social, corruption.users.as_deref(), weights.mi_user),
        (out.z_item, item_graph, corruption.items.as_deref(), weights.mi_item),
    ];
    for (z, rel, perm, weight) in sides {
        let (Some(rel), Some(perm)) = (rel, perm) else { continue };
        if weight == 0.0 {
            continue;
        }
        if let Some((pos, neg)) = mi_logits(z, rel, perm)? {
            let term = mi_term(pos, neg, weight);
            parts.mi += scalar(term);
            total = total.add(term)?;
        }
    }
    parts.total = scalar(total);
    Ok((total, parts))
}
