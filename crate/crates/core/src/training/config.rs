use std::fmt;
use std::str::FromStr;

use super::{CorruptionScope, PositiveSampling, TrainError};
use crate::model::{ModelConfig, ScoreStage};
use crate::temporal::{ExponentConvention, DAY_SECONDS};

/// Model components that can be switched off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ablation {
    /// Merge every interaction type into one.
    NoMultiType,
    NoSocial,
    NoItemGraph,
    NoTemporal,
    NoMi,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::NoMultiType,
        Ablation::NoSocial,
        Ablation::NoItemGraph,
        Ablation::NoTemporal,
        Ablation::NoMi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoMultiType => "no_multi_type",
            Ablation::NoSocial => "no_social",
            Ablation::NoItemGraph => "no_item_graph",
            Ablation::NoTemporal => "no_temporal",
            Ablation::NoMi => "no_mi",
        }
    }
}

impl FromStr for Ablation {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| TrainError::Config(format!("unknown ablation `{s}`")))
    }
}

/// Set of active ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablations {
    pub no_multi_type: bool,
    pub no_social: bool,
    pub no_item_graph: bool,
    pub no_temporal: bool,
    pub no_mi: bool,
}

impl Ablations {
    pub fn insert(&mut self, a: Ablation) {
        *self.flag_mut(a) = true;
    }

    pub fn contains(&self, a: Ablation) -> bool {
        match a {
            Ablation::NoMultiType => self.no_multi_type,
            Ablation::NoSocial => self.no_social,
            Ablation::NoItemGraph => self.no_item_graph,
            Ablation::NoTemporal => self.no_temporal,
            Ablation::NoMi => self.no_mi,
        }
    }

    fn flag_mut(&mut self, a: Ablation) -> &mut bool {
        match a {
            Ablation::NoMultiType => &mut self.no_multi_type,
            Ablation::NoSocial => &mut self.no_social,
            Ablation::NoItemGraph => &mut self.no_item_graph,
            Ablation::NoTemporal => &mut self.no_temporal,
            Ablation::NoMi => &mut self.no_mi,
        }
    }

    /// Comma-separated names, empty string for none.
    pub fn parse_list(s: &str) -> Result<Self, TrainError> {
        let mut out = Ablations::default();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            out.insert(name.parse()?);
        }
        Ok(out)
    }
}

impl fmt::Display for Ablations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Ablation::ALL
            .into_iter()
            .filter(|a| self.contains(*a))
            .map(Ablation::as_str)
            .collect();
        f.write_str(&names.join(","))
    }
}

/// Everything that controls a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// L2 weight over every parameter tensor.
    pub l2: f64,
    /// Weight of the social-graph mutual-information term.
    pub mi_user: f64,
    /// Weight of the item-graph mutual-information term.
    pub mi_item: f64,
    /// Seconds per time slot.
    pub granularity: i64,
    pub temporal_convention: ExponentConvention,
    pub seed: u64,
    pub ablations: Ablations,
    pub positive_sampling: PositiveSampling,
    pub corruption_scope: CorruptionScope,
    /// Mean batch loss above which training is aborted.
    pub divergence_threshold: f64,
    /// Cutoff of the validation hit ratio used for early stopping.
    pub validation_top_n: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            learning_rate: 0.005,
            batch_size: 1024,
            epochs: 100,
            patience: 5,
            l2: 1e-4,
            mi_user: 0.1,
            mi_item: 0.1,
            granularity: DAY_SECONDS,
            temporal_convention: ExponentConvention::Literal,
            seed: 0,
            ablations: Ablations::default(),
            positive_sampling: PositiveSampling::Merged,
            corruption_scope: CorruptionScope::Global,
            divergence_threshold: 1e6,
            validation_top_n: 10,
        }
    }
}

/// `(key, default, description)` for every configurable field.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("dim", "16", "embedding width d (even)"),
    ("layers", "2", "interaction layers L"),
    ("relation_layers", "2", "social/item graph propagation layers"),
    ("slope", "0.2", "LeakyReLU negative slope"),
    ("score_stage", "propagated", "embeddings used for scoring: propagated | encoded"),
    ("learning_rate", "0.005", "Adam step size"),
    ("batch_size", "1024", "triples per batch"),
    ("epochs", "100", "epoch cap"),
    ("patience", "5", "epochs without validation improvement before stopping"),
    ("l2", "0.0001", "L2 regularization weight"),
    ("mi_user", "0.1", "social mutual-information weight"),
    ("mi_item", "0.1", "item-graph mutual-information weight"),
    ("granularity", "86400", "seconds per time slot"),
    ("temporal_convention", "literal", "sinusoid exponent convention: literal | standard"),
    ("seed", "0", "random seed"),
    ("ablate", "", "comma list of no_multi_type, no_social, no_item_graph, no_temporal, no_mi"),
    ("positive_sampling", "merged", "merged | per_type"),
    ("corruption_scope", "global", "node shuffling scope: global | within_component"),
    ("divergence_threshold", "1000000", "abort when the mean batch loss exceeds this"),
    ("validation_top_n", "10", "hit-ratio cutoff for early stopping"),
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value
        .parse()
        .map_err(|_| TrainError::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl TrainConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let value = value.trim();
        let bad = |what: &str| TrainError::Config(format!("`{key}`: expected {what}, got `{value}`"));
        match key {
            "dim" => self.model.dim = parse_num(key, value)?,
            "layers" => self.model.layers = parse_num(key, value)?,
            "relation_layers" => self.model.relation_layers = parse_num(key, value)?,
            "slope" => self.model.slope = parse_num(key, value)?,
            "score_stage" => self.model.score_stage = ScoreStage::parse(value).ok_or_else(|| bad("propagated|encoded"))?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "patience" => self.patience = parse_num(key, value)?,
            "l2" => self.l2 = parse_num(key, value)?,
            "mi_user" => self.mi_user = parse_num(key, value)?,
            "mi_item" => self.mi_item = parse_num(key, value)?,
            "granularity" => self.granularity = parse_num(key, value)?,
            "temporal_convention" => {
                self.temporal_convention = ExponentConvention::parse(value).ok_or_else(|| bad("literal|standard"))?
            }
            "seed" => self.seed = parse_num(key, value)?,
            "ablate" => self.ablations = Ablations::parse_list(value)?,
            "positive_sampling" => {
                self.positive_sampling = PositiveSampling::parse(value).ok_or_else(|| bad("merged|per_type"))?
            }
            "corruption_scope" => {
                self.corruption_scope = CorruptionScope::parse(value).ok_or_else(|| bad("global|within_component"))?
            }
            "divergence_threshold" => self.divergence_threshold = parse_num(key, value)?,
            "validation_top_n" => self.validation_top_n = parse_num(key, value)?,
            _ => return Err(TrainError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every field as `(key, value)`, in [`CONFIG_KEYS`] order. Floats use
    /// the shortest round-trip form.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dim", self.model.dim.to_string()),
            ("layers", self.model.layers.to_string()),
            ("relation_layers", self.model.relation_layers.to_string()),
            ("slope", format!("{:?}", self.model.slope)),
            ("score_stage", self.model.score_stage.as_str().to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("l2", format!("{:?}", self.l2)),
            ("mi_user", format!("{:?}", self.mi_user)),
            ("mi_item", format!("{:?}", self.mi_item)),
            ("granularity", self.granularity.to_string()),
            ("temporal_convention", self.temporal_convention.as_str().to_string()),
            ("seed", self.seed.to_string()),
            ("ablate", self.ablations.to_string()),
            ("positive_sampling", self.positive_sampling.as_str().to_string()),
            ("corruption_scope", self.corruption_scope.as_str().to_string()),
            ("divergence_threshold", format!("{:?}", self.divergence_threshold)),
            ("validation_top_n", self.validation_top_n.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive");
        }
        if self.model.dim == 0 || !self.model.dim.is_multiple_of(2) {
            return err("dim must be a positive even number");
        }
        if self.batch_size == 0 {
            return err("batch_size must be positive");
        }
        if self.patience == 0 {
            return err("patience must be positive");
        }
        if self.granularity <= 0 {
            return err("granularity must be positive");
        }
        if self.validation_top_n == 0 {
            return err("validation_top_n must be positive");
        }
        for (name, v) in [("l2", self.l2), ("mi_user", self.mi_user), ("mi_item", self.mi_item)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TrainError::Config(format!("{name} must be a finite non-negative number")));
            }
        }
        Ok(())
    }

    pub fn with_ablations(mut self, ablations: Ablations) -> Self {
        self.ablations = ablations;
        self
    }
}
