//! The forward pass: typed, time-aware message passing over the user–item
//! graph, layer concatenation, gated type fusion, parameter-free propagation
//! over the social and item graphs, component readout and scoring.

mod context;
mod forward;
mod params;

use crate::numerics::{NumericsError, Tensor, DEFAULT_LEAKY_SLOPE};

pub use context::{GraphContext, RelationContext};
pub use forward::{
    discriminate, encode_interactions, forward, gated_fusion, propagate_layer, readout, relational_propagate, score,
    with_forward, ForwardOutput,
};
pub use params::{glorot_bound, ModelParams, ParamVars};

/// Which embeddings feed the preference inner product.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreStage {
    /// After relational propagation (`z_u`, `z_v`).
    #[default]
    Propagated,
    /// Straight out of the interaction encoder (`h*_u`, `h*_v`).
    Encoded,
}

impl ScoreStage {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreStage::Propagated => "propagated",
            ScoreStage::Encoded => "encoded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "propagated" => Some(ScoreStage::Propagated),
            "encoded" => Some(ScoreStage::Encoded),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    /// Interaction layers `L`.
    pub layers: usize,
    /// Relation-graph propagation layers `L_s`.
    pub relation_layers: usize,
    pub slope: f64,
    pub score_stage: ScoreStage,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 16,
            layers: 2,
            relation_layers: 2,
            slope: DEFAULT_LEAKY_SLOPE,
            score_stage: ScoreStage::Propagated,
        }
    }
}

impl ModelConfig {
    /// Width of the concatenated embeddings.
    pub fn output_width(&self) -> usize {
        (self.layers + 1) * self.dim
    }
}

/// Frozen scoring embeddings. Plain tensors, so scoring can fan out across
/// threads.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub users: Tensor,
    pub items: Tensor,
}

impl Embeddings {
    pub fn compute(params: &ModelParams, ctx: &GraphContext, cfg: &ModelConfig) -> Result<Self, NumericsError> {
        with_forward(params, ctx, cfg, |_, out| Embeddings {
            users: out.scoring_users(cfg.score_stage).value(),
            items: out.scoring_items(cfg.score_stage).value(),
        })
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        score(self.users.row(user), self.items.row(item))
    }
}

#[cfg(test)]
mod tests;
