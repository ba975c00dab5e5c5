use std::collections::BTreeSet;

use log::warn;

use crate::graphs::{validate_records, GraphError, InteractionRecord};

/// A held-out `(user, item)` event used for validation or test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeldOut {
    pub user: usize,
    pub item: usize,
    pub kind: usize,
    pub timestamp: i64,
}

/// Leave-one-out split.
///
/// Per user, the item of the latest event is the test item and the item of
/// the latest event on a different item is the validation item. Training
/// keeps every event on the remaining items, so held-out items never appear
/// in training. Users with two distinct items get no validation item; users
/// with one are train-only.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub users: usize,
    pub items: usize,
    pub types: usize,
    pub train: Vec<InteractionRecord>,
    pub validation: Vec<HeldOut>,
    pub test: Vec<HeldOut>,
    /// Every item each user touched, in any split, sorted.
    pub interacted: Vec<Vec<usize>>,
    /// Users whose only item stayed in training.
    pub train_only_users: Vec<usize>,
}

impl SplitDataset {
    /// Distinct training items per user, sorted.
    pub fn train_items(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.users];
        for r in &self.train {
            sets[r.user].insert(r.item);
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Number of distinct training items per user.
    pub fn train_counts(&self) -> Vec<usize> {
        self.train_items().iter().map(Vec::len).collect()
    }
}

pub fn leave_one_out_split(
    records: &[InteractionRecord],
    users: usize,
    items: usize,
    types: usize,
) -> Result<SplitDataset, GraphError> {
    validate_records(records, users, items, types)?;
    let mut per_user: Vec<Vec<(usize, &InteractionRecord)>> = vec![Vec::new(); users];
    for (pos, r) in records.iter().enumerate() {
        per_user[r.user].push((pos, r));
    }

    let mut held_items: Vec<Vec<usize>> = vec![Vec::new(); users];
    let mut validation = Vec::new();
    let mut test = Vec::new();
    let mut train_only_users = Vec::new();
    let mut interacted = Vec::with_capacity(users);

    for (user, events) in per_user.iter_mut().enumerate() {
        // Stable: equal timestamps keep input order, later input counts as later.
        events.sort_by_key(|&(pos, r)| (r.timestamp, pos));
        let distinct: BTreeSet<usize> = events.iter().map(|(_, r)| r.item).collect();
        interacted.push(distinct.iter().copied().collect::<Vec<_>>());
        if distinct.len() <= 1 {
            if !events.is_empty() {
                train_only_users.push(user);
            }
            continue;
        }
        let held = |r: &InteractionRecord| HeldOut {
            user,
            item: r.item,
            kind: r.kind,
            timestamp: r.timestamp,
        };
        let last = events.last().unwrap().1;
        test.push(held(last));
        held_items[user].push(last.item);
        if distinct.len() >= 3 {
            let val = events.iter().rev().map(|(_, r)| *r).find(|r| r.item != last.item).unwrap();
            validation.push(held(val));
            held_items[user].push(val.item);
        }
    }
    if !train_only_users.is_empty() {
        warn!(
            "{} user(s) have a single distinct item and are train-only",
            train_only_users.len()
        );
    }

    let train = records
        .iter()
        .filter(|r| !held_items[r.user].contains(&r.item))
        .copied()
        .collect();

    Ok(SplitDataset {
        users,
        items,
        types,
        train,
        validation,
        test,
        interacted,
        train_only_users,
    })
}
