//! Leave-one-out evaluation with sampled negatives.
//!
//! Each held-out item is ranked against up to 99 items the user never
//! touched. Negatives are drawn from a `(seed, stream, user)`-keyed random
//! stream, so a given seed fixes them across epochs and runs; validation and
//! test use separate streams.

mod metrics;
mod split;

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

pub use metrics::{
    hr_ndcg_at_n, rank_of, sample_eval_negatives, Metrics, Negatives, DEFAULT_EVAL_NEGATIVES, DEFAULT_TOP_N,
};
pub use split::{leave_one_out_split, HeldOut, SplitDataset};

use crate::model::{Embeddings, GraphContext, ModelConfig, ModelParams};
use crate::numerics::{rng, NumericsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ranks to aggregate")]
    EmptyRanks,
    #[error("no held-out events to evaluate")]
    EmptyTestSet,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub top_n: usize,
    pub negatives: usize,
    pub seed: u64,
    pub stream: u64,
    /// Restrict the target metrics to held-out events of this type.
    pub target_type: Option<usize>,
}

impl EvalOptions {
    pub fn test(seed: u64) -> Self {
        EvalOptions {
            top_n: DEFAULT_TOP_N,
            negatives: DEFAULT_EVAL_NEGATIVES,
            seed,
            stream: rng::streams::TEST_NEGATIVES,
            target_type: None,
        }
    }

    pub fn validation(seed: u64) -> Self {
        EvalOptions {
            stream: rng::streams::VALIDATION_NEGATIVES,
            ..EvalOptions::test(seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketMetrics {
    /// Smallest and largest training-interaction count in the bucket.
    pub train_range: Option<(usize, usize)>,
    pub metrics: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub top_n: usize,
    pub overall: Metrics,
    /// Four population quartiles by training-interaction count, sparsest first.
    pub buckets: Vec<BucketMetrics>,
    /// Metrics per held-out interaction type that occurs.
    pub per_type: Vec<(usize, Metrics)>,
    /// `(type, metrics)` when a target type was requested.
    pub target: Option<(usize, Option<Metrics>)>,
    /// `(user, rank)` for each evaluated event, in input order.
    pub ranks: Vec<(usize, usize)>,
    /// Users that had fewer candidates than requested.
    pub short_candidate_users: usize,
}

/// Assigns each count to one of four population quartiles. Counts equal to a
/// quartile boundary fall into the lower bucket.
pub fn sparsity_buckets(counts: &[usize]) -> Vec<usize> {
    let n = counts.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let cuts: Vec<usize> = (1..4).map(|q| sorted[(q * n).div_ceil(4).max(1) - 1]).collect();
    counts
        .iter()
        .map(|&c| cuts.iter().position(|&cut| c <= cut).unwrap_or(3))
        .collect()
}

/// Ranks every held-out event with `scorer(user, item)` and aggregates.
pub fn evaluate_scores<F>(
    split: &SplitDataset,
    heldout: &[HeldOut],
    scorer: F,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if heldout.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let results: Vec<(usize, bool)> = heldout
        .par_iter()
        .map(|h| {
            let mut r = rng::keyed(opts.seed, opts.stream, h.user as u64);
            let negs = sample_eval_negatives(&split.interacted[h.user], split.items, opts.negatives, &mut r);
            let pos = scorer(h.user, h.item);
            let neg_scores: Vec<f64> = negs.items.iter().map(|&j| scorer(h.user, j)).collect();
            (rank_of(pos, &neg_scores), negs.short)
        })
        .collect();

    let ranks: Vec<usize> = results.iter().map(|r| r.0).collect();
    let overall = hr_ndcg_at_n(&ranks, opts.top_n)?;

    let train_counts = split.train_counts();
    let counts: Vec<usize> = heldout.iter().map(|h| train_counts[h.user]).collect();
    let assignment = sparsity_buckets(&counts);
    let buckets = (0..4)
        .map(|b| {
            let members: Vec<usize> = (0..heldout.len()).filter(|&i| assignment[i] == b).collect();
            let sub: Vec<usize> = members.iter().map(|&i| ranks[i]).collect();
            BucketMetrics {
                train_range: members
                    .iter()
                    .map(|&i| counts[i])
                    .fold(None, |acc: Option<(usize, usize)>, c| match acc {
                        None => Some((c, c)),
                        Some((lo, hi)) => Some((lo.min(c), hi.max(c))),
                    }),
                metrics: hr_ndcg_at_n(&sub, opts.top_n).ok(),
            }
        })
        .collect();

    let subset = |kind: usize| {
        let sub: Vec<usize> = heldout
            .iter()
            .zip(&ranks)
            .filter(|(h, _)| h.kind == kind)
            .map(|(_, &r)| r)
            .collect();
        hr_ndcg_at_n(&sub, opts.top_n).ok()
    };
    let per_type = (0..split.types).filter_map(|k| subset(k).map(|m| (k, m))).collect();
    let target = opts.target_type.map(|k| (k, subset(k)));

    Ok(EvalReport {
        top_n: opts.top_n,
        overall,
        buckets,
        per_type,
        target,
        ranks: heldout.iter().map(|h| h.user).zip(ranks).collect(),
        short_candidate_users: results.iter().filter(|r| r.1).count(),
    })
}

/// Evaluates trained parameters on `heldout`.
pub fn evaluate(
    params: &ModelParams,
    ctx: &GraphContext,
    cfg: &ModelConfig,
    split: &SplitDataset,
    heldout: &[HeldOut],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let emb = Embeddings::compute(params, ctx, cfg)?;
    evaluate_scores(split, heldout, |u, j| emb.score(u, j), opts)
}

/// Hit ratio at `n` of training positives, each ranked against every item
/// its user never touched.
pub fn train_hit_ratio<F>(split: &SplitDataset, scorer: F, n: usize) -> Result<Metrics, EvalError>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let train_items = split.train_items();
    let ranks: Vec<usize> = (0..split.users)
        .into_par_iter()
        .flat_map_iter(|u| {
            let negs: Vec<usize> = (0..split.items)
                .filter(|j| split.interacted[u].binary_search(j).is_err())
                .collect();
            let neg_scores: Vec<f64> = negs.iter().map(|&j| scorer(u, j)).collect();
            train_items[u]
                .iter()
                .map(|&j| rank_of(scorer(u, j), &neg_scores))
                .collect::<Vec<_>>()
        })
        .collect();
    hr_ndcg_at_n(&ranks, n)
}

fn type_label(kind: usize, names: &[String]) -> String {
    names.get(kind).cloned().unwrap_or_else(|| kind.to_string())
}

impl EvalReport {
    /// Flat `key = value` block.
    pub fn to_key_value(&self, type_names: &[String]) -> String {
        let n = self.top_n;
        let mut s = String::new();
        let mut put = |prefix: &str, m: &Metrics| {
            let _ = writeln!(s, "{prefix}hr@{n} = {:?}", m.hr);
            let _ = writeln!(s, "{prefix}ndcg@{n} = {:?}", m.ndcg);
            let _ = writeln!(s, "{prefix}users = {}", m.users);
        };
        put("", &self.overall);
        for (b, bucket) in self.buckets.iter().enumerate() {
            if let Some(m) = &bucket.metrics {
                put(&format!("bucket.{b}."), m);
            }
        }
        for (k, m) in &self.per_type {
            put(&format!("type.{}.", type_label(*k, type_names)), m);
        }
        if let Some((k, Some(m))) = &self.target {
            put(&format!("target.{}.", type_label(*k, type_names)), m);
        }
        for (b, bucket) in self.buckets.iter().enumerate() {
            if let Some((lo, hi)) = bucket.train_range {
                let _ = writeln!(s, "bucket.{b}.train_interactions = {lo}-{hi}");
            }
        }
        let _ = writeln!(s, "short_candidate_users = {}", self.short_candidate_users);
        s
    }

    /// Tab-separated table, one row per metric and scope.
    pub fn to_table(&self, type_names: &[String]) -> String {
        let n = self.top_n;
        let mut s = String::from("scope\tmetric\tvalue\tusers\n");
        let mut row = |scope: &str, m: &Metrics| {
            let _ = writeln!(s, "{scope}\thr@{n}\t{:?}\t{}", m.hr, m.users);
            let _ = writeln!(s, "{scope}\tndcg@{n}\t{:?}\t{}", m.ndcg, m.users);
        };
        row("overall", &self.overall);
        for (b, bucket) in self.buckets.iter().enumerate() {
            if let Some(m) = &bucket.metrics {
                row(&format!("bucket{b}"), m);
            }
        }
        for (k, m) in &self.per_type {
            row(&format!("type:{}", type_label(*k, type_names)), m);
        }
        if let Some((k, Some(m))) = &self.target {
            row(&format!("target:{}", type_label(*k, type_names)), m);
        }
        s
    }
}
