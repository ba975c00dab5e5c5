//! Discrete time slots and their sinusoidal embeddings.
//!
//! A timestamp is bucketed into `floor((t - origin) / granularity)` and each
//! slot `s` is embedded as
//!
//! ```text
//! b[2i]   = sin(s / 10000^(2i / d))
//! b[2i+1] = cos(s / 10000^((2i + 1) / d))
//! ```
//!
//! The cosine entry uses its own index in the exponent, so the two members of
//! a pair run at slightly different frequencies. [`ExponentConvention::Standard`]
//! switches to the shared `2i / d` exponent of Transformer positional encodings.

use log::warn;
use thiserror::Error;

/// One day, the default slot width.
pub const DAY_SECONDS: i64 = 86_400;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemporalError {
    #[error("slot granularity must be positive, got {0}")]
    Granularity(i64),
    #[error("time embedding dimension must be even and positive, got {0}")]
    Dimension(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExponentConvention {
    /// Cosine exponent `(2i + 1) / d`.
    #[default]
    Literal,
    /// Cosine exponent `2i / d`, as in Transformer positional encodings.
    Standard,
}

impl ExponentConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            ExponentConvention::Literal => "literal",
            ExponentConvention::Standard => "standard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "literal" => Some(ExponentConvention::Literal),
            "standard" => Some(ExponentConvention::Standard),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeCodec {
    origin: i64,
    granularity: i64,
    dim: usize,
    convention: ExponentConvention,
}

impl TimeCodec {
    pub fn new(origin: i64, granularity: i64, dim: usize) -> Result<Self, TemporalError> {
        if granularity <= 0 {
            return Err(TemporalError::Granularity(granularity));
        }
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(TemporalError::Dimension(dim));
        }
        Ok(TimeCodec {
            origin,
            granularity,
            dim,
            convention: ExponentConvention::Literal,
        })
    }

    /// Calibrates the origin on the earliest of `timestamps` (the training
    /// split). An empty input puts the origin at 0.
    pub fn fit(timestamps: impl IntoIterator<Item = i64>, granularity: i64, dim: usize) -> Result<Self, TemporalError> {
        let origin = timestamps.into_iter().min().unwrap_or(0);
        TimeCodec::new(origin, granularity, dim)
    }

    pub fn with_convention(mut self, convention: ExponentConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn granularity(&self) -> i64 {
        self.granularity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn convention(&self) -> ExponentConvention {
        self.convention
    }

    /// Slot index of `timestamp`. Timestamps before the origin clamp to 0.
    pub fn slot_of(&self, timestamp: i64) -> u64 {
        if timestamp < self.origin {
            warn!(
                "timestamp {timestamp} precedes time origin {}; using slot 0",
                self.origin
            );
            return 0;
        }
        ((timestamp - self.origin) / self.granularity) as u64
    }

    pub fn embedding(&self, slot: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.embed_into(slot, &mut out);
        out
    }

    pub fn embed_into(&self, slot: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let s = slot as f64;
        let d = self.dim as f64;
        for pair in 0..self.dim / 2 {
            let even = 2 * pair;
            let odd = even + 1;
            let odd_exp = match self.convention {
                ExponentConvention::Literal => odd as f64 / d,
                ExponentConvention::Standard => even as f64 / d,
            };
            out[even] = (s / 10_000f64.powf(even as f64 / d)).sin();
            out[odd] = (s / 10_000f64.powf(odd_exp)).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codec(d: usize) -> TimeCodec {
        TimeCodec::new(1_000, DAY_SECONDS, d).unwrap()
    }

    #[test]
    fn slot_boundaries() {
        let c = codec(4);
        assert_eq!(c.slot_of(1_000), 0);
        assert_eq!(c.slot_of(1_000 + 90_000), 1);
        assert_eq!(c.slot_of(1_000 + 86_400), 1);
        assert_eq!(c.slot_of(1_000 + 86_399), 0);
    }

    #[test]
    fn early_timestamp_clamps() {
        assert_eq!(codec(4).slot_of(0), 0);
    }

    #[test]
    fn slot_zero_alternates() {
        assert_eq!(codec(4).embedding(0), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn literal_exponent_for_cosine() {
        let b = codec(2).embedding(1);
        assert!((b[0] - 0.841_470_984_807_896_5).abs() < 1e-15);
        assert!((b[1] - 0.999_950_000_416_665_3).abs() < 1e-15);
        let std = codec(2).with_convention(ExponentConvention::Standard).embedding(1);
        assert!((std[1] - 1f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_codecs() {
        assert_eq!(TimeCodec::new(0, 0, 4), Err(TemporalError::Granularity(0)));
        assert_eq!(TimeCodec::new(0, 1, 3), Err(TemporalError::Dimension(3)));
    }

    #[test]
    fn nearby_slots_are_distinct_and_bounded() {
        let c = codec(2);
        let mut prev = c.embedding(0);
        for s in 1..=1000 {
            let cur = c.embedding(s);
            assert_ne!(cur, prev, "slot {s}");
            assert!(cur.iter().all(|v| (-1.0..=1.0).contains(v)));
            prev = cur;
        }
    }

    #[test]
    fn fit_uses_earliest_timestamp() {
        let c = TimeCodec::fit([50, 10, 30], 10, 4).unwrap();
        assert_eq!(c.origin(), 10);
        assert_eq!(c.slot_of(30), 2);
    }
}
