//! Joint optimisation: pairwise ranking loss, L2 penalty and the
//! mutual-information terms of the two relation graphs, trained with Adam and
//! stopped early on validation hit ratio.

mod checkpoint;
mod config;
mod early_stop;
mod loss;
mod sampling;

use std::fmt::Write as _;
use std::io;

use log::{debug, info, warn};
use thiserror::Error;

pub use checkpoint::{expected_shapes, Checkpoint, MANIFEST_FILE};
pub use config::{Ablation, Ablations, TrainConfig, CONFIG_KEYS};
pub use early_stop::{EarlyStopping, StopDecision};
pub use loss::{bpr_loss, bpr_term, mi_logits, mi_term, total_loss, Corruption, LossParts, LossWeights, MI_EPS};
pub use sampling::{
    corruption_permutation, sample_bpr_triples, shuffle_corrupt, BprSampler, BprTriple, CorruptionScope,
    PositiveSampling,
};

use crate::evaluation::{evaluate_scores, leave_one_out_split, EvalError, EvalOptions, SplitDataset};
use crate::graphs::{GraphError, InteractionRecord, MultiTypedGraph, RelationGraph, DEFAULT_CATEGORY_EDGE_CAP};
use crate::model::{forward, Embeddings, GraphContext, ModelParams};
use crate::numerics::{adam_step, rng, AdamConfig, AdamState, NumericsError, Tape};
use crate::temporal::{TemporalError, TimeCodec};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no validation events; every user needs at least three distinct items for one")]
    NoValidation,
    #[error("no trainable (user, item) pairs")]
    NoPositives,
    #[error("epoch {epoch}: mean loss {loss:e} exceeds the divergence threshold")]
    Diverged {
        epoch: usize,
        loss: f64,
        last_good: Box<Checkpoint>,
        history: Vec<EpochRecord>,
    },
    #[error("epoch {epoch}, batch {batch}: non-finite {what} (bpr {:?}, l2 {:?}, mi {:?})", parts.bpr, parts.l2, parts.mi)]
    NonFinite {
        epoch: usize,
        batch: usize,
        what: &'static str,
        parts: LossParts,
        last_good: Box<Checkpoint>,
        history: Vec<EpochRecord>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TrainError {
    /// Failures caused by the optimisation itself rather than its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TrainError::Diverged { .. } | TrainError::NonFinite { .. } | TrainError::Numerics(_)
        )
    }
}

/// Where item–item relations come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ItemRelations {
    /// `(item, category)` pairs; items sharing a category are linked.
    Categories(Vec<(usize, usize)>),
    /// Items with at least this many common users under one type are linked.
    CoInteraction { min_common_users: usize },
}

/// Dense-indexed training input.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub users: usize,
    pub items: usize,
    pub types: usize,
    pub records: Vec<InteractionRecord>,
    pub social_edges: Vec<(usize, usize)>,
    pub item_relations: ItemRelations,
}

/// Split, graphs and precomputed operators for one dataset and config.
#[derive(Clone, Debug)]
pub struct TrainingSetup {
    pub split: SplitDataset,
    pub codec: TimeCodec,
    /// Interaction types seen by the model.
    pub model_types: usize,
    pub graph: MultiTypedGraph,
    pub social: Option<RelationGraph>,
    pub item_graph: Option<RelationGraph>,
    pub context: GraphContext,
}

impl TrainingSetup {
    pub fn new(data: &Dataset, cfg: &TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let split = leave_one_out_split(&data.records, data.users, data.items, data.types)?;
        let model_types = if cfg.ablations.no_multi_type { 1 } else { data.types };
        let graph_records: Vec<InteractionRecord> = if cfg.ablations.no_multi_type {
            split.train.iter().map(|r| InteractionRecord { kind: 0, ..*r }).collect()
        } else {
            split.train.clone()
        };
        let codec = TimeCodec::fit(data.records.iter().map(|r| r.timestamp), cfg.granularity, cfg.model.dim)?
            .with_convention(cfg.temporal_convention);
        let graph = MultiTypedGraph::build(&graph_records, data.users, data.items, model_types, &codec)?;

        let social = if cfg.ablations.no_social {
            None
        } else {
            Some(RelationGraph::social(&data.social_edges, data.users)?)
        };
        let item_graph = if cfg.ablations.no_item_graph {
            None
        } else {
            Some(match &data.item_relations {
                ItemRelations::Categories(pairs) => {
                    RelationGraph::item_categories(pairs, data.items, DEFAULT_CATEGORY_EDGE_CAP, cfg.seed)?
                }
                ItemRelations::CoInteraction { min_common_users } => {
                    RelationGraph::item_cointeraction(&split.train, data.items, *min_common_users)?
                }
            })
        };
        let codec_for_model = (!cfg.ablations.no_temporal).then_some(&codec);
        let context = GraphContext::new(&graph, codec_for_model, cfg.model.dim, social.as_ref(), item_graph.as_ref());
        Ok(TrainingSetup {
            split,
            codec,
            model_types,
            graph,
            social,
            item_graph,
            context,
        })
    }

    pub fn init_params(&self, cfg: &TrainConfig) -> ModelParams {
        ModelParams::init(
            self.split.users,
            self.split.items,
            self.model_types,
            cfg.model.dim,
            cfg.model.layers,
            cfg.seed,
        )
    }

    fn checkpoint(&self, cfg: &TrainConfig, params: ModelParams, epoch: usize, hr: Option<f64>) -> Checkpoint {
        Checkpoint {
            config: cfg.clone(),
            users: self.split.users,
            items: self.split.items,
            types: self.model_types,
            epoch,
            validation_hr: hr,
            time_origin: self.codec.origin(),
            params,
        }
    }
}

/// Per-epoch averages over batches plus the validation metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub bpr: f64,
    pub l2: f64,
    pub mi: f64,
    pub total: f64,
    pub validation_hr: f64,
    pub validation_ndcg: f64,
    pub improved: bool,
}

/// Tab-separated training log.
pub fn history_table(history: &[EpochRecord], top_n: usize) -> String {
    let mut s = format!("epoch\tbpr\tl2\tmi\ttotal\tval_hr@{top_n}\tval_ndcg@{top_n}\timproved\n");
    for r in history {
        let _ = writeln!(
            s,
            "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
            r.epoch, r.bpr, r.l2, r.mi, r.total, r.validation_hr, r.validation_ndcg, r.improved
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    EpochCap,
    EarlyStopped,
}

/// Outcome of [`fit`].
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Parameters of the best validation epoch.
    pub best: Checkpoint,
    /// Parameters after the last completed epoch.
    pub last: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
    pub setup: TrainingSetup,
}

/// Trains from a fresh initialisation.
pub fn fit(data: &Dataset, cfg: &TrainConfig) -> Result<FitResult, TrainError> {
    let setup = TrainingSetup::new(data, cfg)?;
    let params = setup.init_params(cfg);
    fit_from(setup, params, cfg)
}

/// Trains starting from `params`.
pub fn fit_from(setup: TrainingSetup, mut params: ModelParams, cfg: &TrainConfig) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    if setup.split.validation.is_empty() {
        return Err(TrainError::NoValidation);
    }
    let sampler = BprSampler::new(&setup.split.train, setup.split.users, setup.split.items, cfg.positive_sampling);
    if sampler.is_empty() {
        return Err(TrainError::NoPositives);
    }
    let batches = sampler.len().div_ceil(cfg.batch_size);
    let adam = AdamConfig::new(cfg.learning_rate)?;
    let mut adam_state = AdamState::for_params(params.tensors());
    let mut bpr_rng = rng::seeded(cfg.seed, rng::streams::BPR);
    let mut corruption_rng = rng::seeded(cfg.seed, rng::streams::CORRUPTION);
    let val_opts = EvalOptions {
        top_n: cfg.validation_top_n,
        ..EvalOptions::validation(cfg.seed)
    };
    let weights = LossWeights {
        l2: cfg.l2,
        mi_user: if cfg.ablations.no_mi { 0.0 } else { cfg.mi_user },
        mi_item: if cfg.ablations.no_mi { 0.0 } else { cfg.mi_item },
    };
    let ctx = &setup.context;
    info!(
        "training: {} users, {} items, {} model types, {} positives, {batches} batch(es) per epoch",
        setup.split.users,
        setup.split.items,
        setup.model_types,
        sampler.len()
    );

    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = setup.checkpoint(cfg, params.clone(), 0, None);
    let mut history = Vec::new();
    let mut stop = StopReason::EpochCap;

    for epoch in 1..=cfg.epochs {
        let corruption = Corruption {
            users: ctx
                .social
                .as_ref()
                .filter(|_| weights.mi_user > 0.0)
                .map(|r| corruption_permutation(&r.labels, &r.component_sizes, cfg.corruption_scope, &mut corruption_rng)),
            items: ctx
                .item_graph
                .as_ref()
                .filter(|_| weights.mi_item > 0.0)
                .map(|r| corruption_permutation(&r.labels, &r.component_sizes, cfg.corruption_scope, &mut corruption_rng)),
        };
        let mut sums = LossParts::default();
        for batch in 0..batches {
            // One epoch draws as many triples as there are positives.
            let size = cfg.batch_size.min(sampler.len() - batch * cfg.batch_size);
            let triples = sampler.sample(size, &mut bpr_rng);
            let tape = Tape::new();
            let vars = params.bind(&tape);
            let out = forward(&vars, ctx, &cfg.model)?;
            let (loss, parts) = total_loss(
                &vars,
                &out,
                ctx.social.as_ref(),
                ctx.item_graph.as_ref(),
                &triples,
                &corruption,
                cfg.model.score_stage,
                &weights,
            )?;
            let fail = |what| TrainError::NonFinite {
                epoch,
                batch,
                what,
                parts,
                last_good: Box::new(best.clone()),
                history: history.clone(),
            };
            if !parts.is_finite() {
                return Err(fail("loss"));
            }
            let grads = tape.backward(loss)?;
            let grads = vars.gradients(&grads);
            if !grads.iter().all(|g| g.is_finite()) {
                return Err(fail("gradient"));
            }
            adam_step(&mut params.tensors_mut(), &grads, &adam, &mut adam_state)?;
            if !params.is_finite() {
                return Err(fail("parameter"));
            }
            sums.bpr += parts.bpr;
            sums.l2 += parts.l2;
            sums.mi += parts.mi;
            sums.total += parts.total;
        }
        let n = batches as f64;
        let mean = LossParts {
            bpr: sums.bpr / n,
            l2: sums.l2 / n,
            mi: sums.mi / n,
            total: sums.total / n,
        };
        if mean.total > cfg.divergence_threshold {
            return Err(TrainError::Diverged {
                epoch,
                loss: mean.total,
                last_good: Box::new(best),
                history,
            });
        }

        let emb = Embeddings::compute(&params, ctx, &cfg.model)?;
        let val = evaluate_scores(&setup.split, &setup.split.validation, |u, j| emb.score(u, j), &val_opts)?;
        let decision = stopper.observe(epoch, val.overall.hr);
        let improved = decision == StopDecision::Improved;
        if improved {
            best = setup.checkpoint(cfg, params.clone(), epoch, Some(val.overall.hr));
        }
        history.push(EpochRecord {
            epoch,
            bpr: mean.bpr,
            l2: mean.l2,
            mi: mean.mi,
            total: mean.total,
            validation_hr: val.overall.hr,
            validation_ndcg: val.overall.ndcg,
            improved,
        });
        debug!(
            "epoch {epoch}: loss {:.6} (bpr {:.6}, l2 {:.6}, mi {:.6}), val hr@{} {:.4}",
            mean.total, mean.bpr, mean.l2, mean.mi, cfg.validation_top_n, val.overall.hr
        );
        if decision == StopDecision::Stop {
            info!("early stop at epoch {epoch}; best epoch {}", stopper.best_epoch());
            stop = StopReason::EarlyStopped;
            break;
        }
    }
    if best.epoch == 0 {
        warn!("no epoch ran; returning the initial parameters");
    }
    let last_epoch = history.last().map_or(0, |r: &EpochRecord| r.epoch);
    let last_hr = history.last().map(|r: &EpochRecord| r.validation_hr);
    let last = setup.checkpoint(cfg, params, last_epoch, last_hr);
    Ok(FitResult {
        best,
        last,
        history,
        stop,
        setup,
    })
}
