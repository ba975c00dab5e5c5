use std::collections::BTreeSet;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::graphs::InteractionRecord;
use crate::numerics::rng::Rng;

/// `(user, positive, negative)` training triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BprTriple {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

/// How positives are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PositiveSampling {
    /// Uniform over distinct observed `(user, item)` pairs, any type.
    #[default]
    Merged,
    /// Uniform over distinct observed `(user, item, type)` events.
    PerType,
}

impl PositiveSampling {
    pub fn as_str(self) -> &'static str {
        match self {
            PositiveSampling::Merged => "merged",
            PositiveSampling::PerType => "per_type",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "merged" => Some(PositiveSampling::Merged),
            "per_type" => Some(PositiveSampling::PerType),
            _ => None,
        }
    }
}

/// Uniform positive draw plus rejection-sampled negative.
#[derive(Clone, Debug)]
pub struct BprSampler {
    items: usize,
    positives: Vec<(usize, usize)>,
    /// Sorted training items per user.
    seen: Vec<Vec<usize>>,
}

impl BprSampler {
    pub fn new(train: &[InteractionRecord], users: usize, items: usize, mode: PositiveSampling) -> Self {
        let mut seen = vec![BTreeSet::new(); users];
        for r in train {
            seen[r.user].insert(r.item);
        }
        let full: Vec<bool> = seen.iter().map(|s| s.len() >= items).collect();
        let skipped = full.iter().filter(|&&f| f).count();
        if skipped > 0 {
            warn!("{skipped} user(s) interacted with every item; no negatives exist, skipping them");
        }
        let positives: Vec<(usize, usize)> = match mode {
            PositiveSampling::Merged => seen
                .iter()
                .enumerate()
                .filter(|(u, _)| !full[*u])
                .flat_map(|(u, s)| s.iter().map(move |&j| (u, j)))
                .collect(),
            PositiveSampling::PerType => {
                let events: BTreeSet<(usize, usize, usize)> =
                    train.iter().filter(|r| !full[r.user]).map(|r| (r.user, r.item, r.kind)).collect();
                events.into_iter().map(|(u, j, _)| (u, j)).collect()
            }
        };
        BprSampler {
            items,
            positives,
            seen: seen.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    /// Distinct positives available.
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Vec<BprTriple> {
        if self.positives.is_empty() {
            return Vec::new();
        }
        (0..batch_size)
            .map(|_| {
                let (user, positive) = self.positives[rng.gen_range(0..self.positives.len())];
                let seen = &self.seen[user];
                let negative = loop {
                    let j = rng.gen_range(0..self.items);
                    if seen.binary_search(&j).is_err() {
                        break j;
                    }
                };
                BprTriple { user, positive, negative }
            })
            .collect()
    }
}

/// Free function form of [`BprSampler::sample`].
pub fn sample_bpr_triples(sampler: &BprSampler, batch_size: usize, rng: &mut Rng) -> Vec<BprTriple> {
    sampler.sample(batch_size, rng)
}

/// Which rows a corrupted embedding may be drawn from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorruptionScope {
    /// One permutation over every node of a non-singleton component, so a
    /// shuffled row usually comes from another component.
    #[default]
    Global,
    /// Independent permutation inside each component.
    WithinComponent,
}

impl CorruptionScope {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionScope::Global => "global",
            CorruptionScope::WithinComponent => "within_component",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "global" => Some(CorruptionScope::Global),
            "within_component" => Some(CorruptionScope::WithinComponent),
            _ => None,
        }
    }
}

/// Row permutation for node shuffling. `perm[i]` is the row that replaces row
/// `i`. Rows of singleton components stay fixed; fixed points elsewhere are
/// allowed.
pub fn corruption_permutation(labels: &[usize], sizes: &[usize], scope: CorruptionScope, rng: &mut Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..labels.len()).collect();
    match scope {
        CorruptionScope::Global => {
            let movable: Vec<usize> = (0..labels.len()).filter(|&i| sizes[labels[i]] > 1).collect();
            let mut shuffled = movable.clone();
            shuffled.shuffle(rng);
            for (&slot, &src) in movable.iter().zip(&shuffled) {
                perm[slot] = src;
            }
        }
        CorruptionScope::WithinComponent => {
            let mut members = vec![Vec::new(); sizes.len()];
            for (i, &c) in labels.iter().enumerate() {
                members[c].push(i);
            }
            for group in members.iter().filter(|g| g.len() > 1) {
                let mut shuffled = group.clone();
                shuffled.shuffle(rng);
                for (&slot, &src) in group.iter().zip(&shuffled) {
                    perm[slot] = src;
                }
            }
        }
    }
    perm
}

/// Applies [`corruption_permutation`] to the rows of `z`.
pub fn shuffle_corrupt(
    z: &crate::numerics::Tensor,
    labels: &[usize],
    sizes: &[usize],
    scope: CorruptionScope,
    rng: &mut Rng,
) -> crate::numerics::Tensor {
    let perm = corruption_permutation(labels, sizes, scope, rng);
    let mut out = crate::numerics::Tensor::zeros(z.rows(), z.cols());
    for (i, &src) in perm.iter().enumerate() {
        out.row_mut(i).copy_from_slice(z.row(src));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng, Tensor};

    #[test]
    fn negatives_avoid_positives() {
        let train = [InteractionRecord::new(0, 0, 0, 0)];
        let s = BprSampler::new(&train, 1, 3, PositiveSampling::Merged);
        let mut r = rng::seeded(0, 1);
        for t in s.sample(500, &mut r) {
            assert_eq!((t.user, t.positive), (0, 0));
            assert!(t.negative == 1 || t.negative == 2);
        }
    }

    #[test]
    fn seeded_batches_repeat() {
        let train: Vec<_> = (0..10).map(|n| InteractionRecord::new(n % 3, n, 0, 0)).collect();
        let s = BprSampler::new(&train, 3, 20, PositiveSampling::Merged);
        let a = s.sample(64, &mut rng::seeded(5, 2));
        let b = s.sample(64, &mut rng::seeded(5, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn saturated_users_are_skipped() {
        let train = [
            InteractionRecord::new(0, 0, 0, 0),
            InteractionRecord::new(0, 1, 0, 0),
            InteractionRecord::new(1, 0, 0, 0),
        ];
        let s = BprSampler::new(&train, 2, 2, PositiveSampling::Merged);
        assert_eq!(s.len(), 1);
        assert!(s.sample(20, &mut rng::seeded(0, 0)).iter().all(|t| t.user == 1 && t.negative == 1));
    }

    #[test]
    fn per_type_counts_each_type() {
        let train = [InteractionRecord::new(0, 0, 0, 0), InteractionRecord::new(0, 0, 1, 0)];
        assert_eq!(BprSampler::new(&train, 1, 4, PositiveSampling::PerType).len(), 2);
        assert_eq!(BprSampler::new(&train, 1, 4, PositiveSampling::Merged).len(), 1);
    }

    #[test]
    fn singletons_stay_fixed() {
        let labels = [0, 1, 1, 2];
        let sizes = [1, 2, 1];
        for scope in [CorruptionScope::Global, CorruptionScope::WithinComponent] {
            for seed in 0..20 {
                let p = corruption_permutation(&labels, &sizes, scope, &mut rng::seeded(seed, 3));
                assert_eq!(p[0], 0);
                assert_eq!(p[3], 3);
            }
        }
    }

    #[test]
    fn two_row_component_swaps_half_the_time() {
        let labels = [0, 0];
        let sizes = [2];
        let mut r = rng::seeded(17, 3);
        let swaps = (0..4000)
            .filter(|_| corruption_permutation(&labels, &sizes, CorruptionScope::WithinComponent, &mut r)[0] == 1)
            .count();
        // Binomial(4000, 1/2): sigma ~ 31.6
        assert!((swaps as i64 - 2000).abs() < 4 * 32, "{swaps}");
    }

    #[test]
    fn within_component_stays_inside() {
        let labels = [0, 0, 0, 1, 1, 1, 1];
        let sizes = [3, 4];
        for seed in 0..20 {
            let p = corruption_permutation(&labels, &sizes, CorruptionScope::WithinComponent, &mut rng::seeded(seed, 3));
            for (i, &src) in p.iter().enumerate() {
                assert_eq!(labels[i], labels[src]);
            }
        }
    }

    #[test]
    fn corruption_preserves_row_multiset() {
        let z = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 8.0]]);
        let out = shuffle_corrupt(&z, &[0, 0, 1, 1], &[2, 2], CorruptionScope::Global, &mut rng::seeded(2, 3));
        let mut a: Vec<Vec<u64>> = (0..4).map(|r| z.row(r).iter().map(|v| v.to_bits()).collect()).collect();
        let mut b: Vec<Vec<u64>> = (0..4).map(|r| out.row(r).iter().map(|v| v.to_bits()).collect()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
