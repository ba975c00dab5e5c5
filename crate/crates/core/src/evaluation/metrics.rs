use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng as _;

use super::EvalError;
use crate::numerics::rng::Rng;

/// Number of sampled negatives per held-out positive.
pub const DEFAULT_EVAL_NEGATIVES: usize = 99;
pub const DEFAULT_TOP_N: usize = 10;

/// Sampled negative candidates for one user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Negatives {
    pub items: Vec<usize>,
    /// Set when fewer than the requested count were available.
    pub short: bool,
}

/// Draws `count` distinct items outside `interacted` (sorted), uniformly
/// without replacement. If fewer exist, returns all of them and sets `short`.
pub fn sample_eval_negatives(interacted: &[usize], items: usize, count: usize, rng: &mut Rng) -> Negatives {
    let available = items - interacted.len();
    if available <= count {
        let all: Vec<usize> = (0..items).filter(|j| interacted.binary_search(j).is_err()).collect();
        return Negatives {
            short: all.len() < count,
            items: all,
        };
    }
    if available < 4 * count {
        let pool: Vec<usize> = (0..items).filter(|j| interacted.binary_search(j).is_err()).collect();
        let picked = sample(rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
        return Negatives { items: picked, short: false };
    }
    let mut seen = HashSet::with_capacity(count);
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let j = rng.gen_range(0..items);
        if interacted.binary_search(&j).is_err() && seen.insert(j) {
            picked.push(j);
        }
    }
    Negatives { items: picked, short: false }
}

/// 1-based rank of the positive among itself and the negatives. Ties count
/// against the positive.
pub fn rank_of(positive_score: f64, negative_scores: &[f64]) -> usize {
    1 + negative_scores.iter().filter(|&&s| s >= positive_score).count()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub hr: f64,
    pub ndcg: f64,
    pub users: usize,
}

/// Hit ratio and NDCG at `n` over single-relevant-item ranks.
pub fn hr_ndcg_at_n(ranks: &[usize], n: usize) -> Result<Metrics, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    let mut hits = 0usize;
    let mut gain = 0.0;
    for &r in ranks {
        assert!(r >= 1, "ranks are 1-based");
        if r <= n {
            hits += 1;
            gain += 1.0 / ((r + 1) as f64).log2();
        }
    }
    let m = ranks.len() as f64;
    Ok(Metrics {
        hr: hits as f64 / m,
        ndcg: gain / m,
        users: ranks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng;

    #[test]
    fn metric_hand_values() {
        assert_eq!(hr_ndcg_at_n(&[1], 10).unwrap(), Metrics { hr: 1.0, ndcg: 1.0, users: 1 });
        let m = hr_ndcg_at_n(&[3], 10).unwrap();
        assert_eq!((m.hr, m.ndcg), (1.0, 0.5));
        let m = hr_ndcg_at_n(&[11], 10).unwrap();
        assert_eq!((m.hr, m.ndcg), (0.0, 0.0));
        assert!(matches!(hr_ndcg_at_n(&[], 10), Err(EvalError::EmptyRanks)));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of(5.0, &[1.0, 2.0]), 1);
        assert_eq!(rank_of(2.0, &[1.0, 2.0]), 2);
        let negs: Vec<f64> = (0..99).map(|i| i as f64).collect();
        assert_eq!(rank_of(-1.0, &negs), 100);
    }

    #[test]
    fn negatives_are_distinct_and_fresh() {
        let interacted = [0, 3, 9, 50, 199];
        let mut r = rng::seeded(1, 9);
        let n = sample_eval_negatives(&interacted, 200, 99, &mut r);
        assert_eq!(n.items.len(), 99);
        assert!(!n.short);
        let set: HashSet<_> = n.items.iter().collect();
        assert_eq!(set.len(), 99);
        assert!(n.items.iter().all(|j| !interacted.contains(j)));
        let again = sample_eval_negatives(&interacted, 200, 99, &mut rng::seeded(1, 9));
        assert_eq!(n, again);
    }

    #[test]
    fn short_candidate_pool_is_flagged() {
        let interacted: Vec<usize> = (0..10).collect();
        let n = sample_eval_negatives(&interacted, 100, 99, &mut rng::seeded(0, 0));
        assert_eq!(n.items.len(), 90);
        assert!(n.short);
    }

    #[test]
    fn large_catalogue_uses_rejection_path() {
        let interacted = [1, 2, 3];
        let n = sample_eval_negatives(&interacted, 100_000, 99, &mut rng::seeded(4, 4));
        let set: HashSet<_> = n.items.iter().collect();
        assert_eq!(set.len(), 99);
        assert!(n.items.iter().all(|j| *j < 100_000 && !interacted.contains(j)));
    }
}
