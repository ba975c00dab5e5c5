//! Seeded synthetic datasets for tests, benchmarks and the demo bundle.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::graphs::InteractionRecord;
use crate::numerics::rng;
use crate::training::{Dataset, ItemRelations};

/// Users and items split into aligned communities: users of community `c`
/// interact only with items of category `c` and befriend each other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedConfig {
    pub communities: usize,
    pub users_per_community: usize,
    pub items_per_community: usize,
    pub types: usize,
    /// Distinct items per user.
    pub items_per_user: usize,
    /// Social ties per user, drawn inside its community.
    pub ties_per_user: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            communities: 2,
            users_per_community: 10,
            items_per_community: 15,
            types: 2,
            items_per_user: 8,
            ties_per_user: 3,
            seed: 0,
        }
    }
}

/// Builds a [`PlantedConfig`] dataset. Users and items are numbered
/// community by community.
pub fn planted(cfg: &PlantedConfig) -> Dataset {
    assert!(cfg.items_per_user <= cfg.items_per_community, "users cannot pick more items than a category holds");
    assert!(cfg.types > 0 && cfg.communities > 0 && cfg.users_per_community > 0);
    let mut r = rng::seeded(cfg.seed, rng::streams::SYNTHETIC);
    let users = cfg.communities * cfg.users_per_community;
    let items = cfg.communities * cfg.items_per_community;
    let mut records = Vec::new();
    let mut social = BTreeSet::new();
    for u in 0..users {
        let c = u / cfg.users_per_community;
        let first_item = c * cfg.items_per_community;
        for (t, k) in sample(&mut r, cfg.items_per_community, cfg.items_per_user).into_iter().enumerate() {
            records.push(InteractionRecord::new(
                u,
                first_item + k,
                r.gen_range(0..cfg.types),
                (t as i64 + 1) * 86_400 + r.gen_range(0..86_400),
            ));
        }
        let first_user = c * cfg.users_per_community;
        // A ring keeps each community connected; extra ties are random.
        if cfg.users_per_community > 1 {
            let next = first_user + (u - first_user + 1) % cfg.users_per_community;
            social.insert((u.min(next), u.max(next)));
        }
        for _ in 1..cfg.ties_per_user {
            let v = first_user + r.gen_range(0..cfg.users_per_community);
            if v != u {
                social.insert((u.min(v), u.max(v)));
            }
        }
    }
    let categories = (0..items).map(|j| (j, j / cfg.items_per_community)).collect();
    Dataset {
        users,
        items,
        types: cfg.types,
        records,
        social_edges: social.into_iter().collect(),
        item_relations: ItemRelations::Categories(categories),
    }
}

/// Community of a user in a [`planted`] dataset.
pub fn planted_community(cfg: &PlantedConfig, user: usize) -> usize {
    user / cfg.users_per_community
}

/// Interactions, ties and categories drawn uniformly at random.
pub fn uniform(users: usize, items: usize, types: usize, items_per_user: usize, seed: u64) -> Dataset {
    assert!(items_per_user <= items);
    let mut r = rng::seeded(seed, rng::streams::SYNTHETIC);
    let mut records = Vec::with_capacity(users * items_per_user);
    for u in 0..users {
        for (t, j) in sample(&mut r, items, items_per_user).into_iter().enumerate() {
            records.push(InteractionRecord::new(u, j, r.gen_range(0..types), t as i64 * 3_600));
        }
    }
    let mut social = BTreeSet::new();
    for u in 0..users {
        let v = r.gen_range(0..users);
        if v != u {
            social.insert((u.min(v), u.max(v)));
        }
    }
    let categories = (0..items).map(|j| (j, r.gen_range(0..10usize))).collect();
    Dataset {
        users,
        items,
        types,
        records,
        social_edges: social.into_iter().collect(),
        item_relations: ItemRelations::Categories(categories),
    }
}

/// `edges` distinct random `(user, item, type)` events with random
/// timestamps, for scaling measurements.
pub fn random_edges(users: usize, items: usize, types: usize, edges: usize, seed: u64) -> Vec<InteractionRecord> {
    assert!(edges <= users * items * types, "more edges than distinct triples");
    let mut r = rng::seeded(seed, rng::streams::SYNTHETIC);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(edges);
    while out.len() < edges {
        let (u, j, k) = (r.gen_range(0..users), r.gen_range(0..items), r.gen_range(0..types));
        if seen.insert((u, j, k)) {
            out.push(InteractionRecord::new(u, j, k, r.gen_range(0..365 * 86_400)));
        }
    }
    out
}

/// Small fixed instance: 5 users, 8 items in 3 categories, 2 types, four
/// events per user and two social components.
pub fn canonical() -> Dataset {
    let mut records = Vec::new();
    for u in 0..5 {
        for t in 0..4 {
            records.push(InteractionRecord::new(u, (u + 3 * t) % 8, (u + t) % 2, (t as i64) * 86_400 + u as i64));
        }
    }
    Dataset {
        users: 5,
        items: 8,
        types: 2,
        records,
        social_edges: vec![(0, 1), (1, 2), (3, 4)],
        item_relations: ItemRelations::Categories((0..8).map(|j| (j, j / 3)).collect()),
    }
}
