//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kcgn::training::{TrainConfig, CONFIG_KEYS};

/// Keys without defaults.
pub const REQUIRED_KEYS: [(&str, &str); 2] = [
    ("bundle", "directory written by `kcgn prepare`"),
    ("output", "directory for the checkpoint and training log"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub bundle: PathBuf,
    pub output: PathBuf,
    pub train: TrainConfig,
}

/// Every accepted key with its default, one per line.
pub fn key_listing() -> String {
    let mut s = String::new();
    for (key, what) in REQUIRED_KEYS {
        let _ = writeln!(s, "  {key} = <required>  # {what}");
    }
    for (key, default, what) in CONFIG_KEYS {
        let _ = writeln!(s, "  {key} = {default}  # {what}");
    }
    s
}

impl RunConfig {
    /// Parses config text. Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut train = TrainConfig::default();
        let mut bundle = None;
        let mut output = None;
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected `key = value`", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                bail!("line {}: `{key}` given twice", n + 1);
            }
            match key {
                "bundle" => bundle = Some(base.join(value)),
                "output" => output = Some(base.join(value)),
                _ => train.set(key, value).with_context(|| format!("line {}", n + 1))?,
            }
        }
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .map(|(k, _)| *k)
            .filter(|k| !seen.contains(*k))
            .collect();
        if !missing.is_empty() {
            bail!(
                "missing required key(s): {}\naccepted keys and defaults:\n{}",
                missing.join(", "),
                key_listing()
            );
        }
        train.validate()?;
        Ok(RunConfig {
            bundle: bundle.expect("checked"),
            output: output.expect("checked"),
            train,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }

    /// Fully resolved config, every key spelled out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bundle = {}", self.bundle.display());
        let _ = writeln!(s, "output = {}", self.output.display());
        for (k, v) in self.train.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
