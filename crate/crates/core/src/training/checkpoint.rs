//! On-disk checkpoints: `manifest.txt` with `key = value` lines plus one raw
//! little-endian `f64` file per parameter tensor.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{TrainConfig, TrainError};
use crate::model::ModelParams;
use crate::numerics::Tensor;

pub const MANIFEST_FILE: &str = "manifest.txt";
const FORMAT: &str = "kcgn-checkpoint 1";

/// Trained parameters plus what is needed to rebuild the graph context.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub users: usize,
    pub items: usize,
    /// Interaction types seen by the model (1 when types were merged).
    pub types: usize,
    pub epoch: usize,
    pub validation_hr: Option<f64>,
    pub time_origin: i64,
    pub params: ModelParams,
}

/// `(name, rows, cols)` of every tensor for the given sizes, canonical order.
pub fn expected_shapes(users: usize, items: usize, types: usize, dim: usize, layers: usize) -> Vec<(String, usize, usize)> {
    let mut out = vec![
        ("user_embedding".to_string(), users, dim),
        ("item_embedding".to_string(), items * types, dim),
    ];
    for l in 0..layers {
        out.push((format!("w_neighbor.{l}"), dim, dim));
        out.push((format!("w_self.{l}"), dim, dim));
    }
    out.push(("gate".to_string(), (layers + 1) * dim, 1));
    out
}

impl Checkpoint {
    /// Checks every tensor against the shapes implied by a dataset.
    pub fn check_compatible(&self, users: usize, items: usize, types: usize) -> Result<(), TrainError> {
        let want = expected_shapes(users, items, types, self.config.model.dim, self.config.model.layers);
        let have = self.params.named();
        if want.len() != have.len() {
            return Err(TrainError::Checkpoint(format!(
                "expected {} tensors, checkpoint has {}",
                want.len(),
                have.len()
            )));
        }
        for ((name, rows, cols), (_, t)) in want.iter().zip(have) {
            if t.shape() != (*rows, *cols) {
                return Err(TrainError::Checkpoint(format!(
                    "tensor `{name}` has shape {}x{}, dataset expects {rows}x{cols}",
                    t.rows(),
                    t.cols()
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        fs::create_dir_all(dir)?;
        let mut m = String::new();
        let _ = writeln!(m, "format = {FORMAT}");
        let _ = writeln!(m, "users = {}", self.users);
        let _ = writeln!(m, "items = {}", self.items);
        let _ = writeln!(m, "types = {}", self.types);
        let _ = writeln!(m, "epoch = {}", self.epoch);
        match self.validation_hr {
            Some(hr) => {
                let _ = writeln!(m, "validation_hr = {hr:?}");
            }
            None => {
                let _ = writeln!(m, "validation_hr = none");
            }
        }
        let _ = writeln!(m, "time_origin = {}", self.time_origin);
        for (k, v) in self.config.to_pairs() {
            let _ = writeln!(m, "config.{k} = {v}");
        }
        for (name, t) in self.params.named() {
            let file = format!("{name}.f64");
            let _ = writeln!(m, "tensor.{name} = {} {} {file}", t.rows(), t.cols());
            let bytes: Vec<u8> = t.values().iter().flat_map(|v| v.to_le_bytes()).collect();
            fs::write(dir.join(&file), bytes)?;
        }
        fs::write(dir.join(MANIFEST_FILE), m)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TrainError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let mut fields = BTreeMap::new();
        let mut tensors = Vec::new();
        let mut config = TrainConfig::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Checkpoint(format!("manifest line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(key) = k.strip_prefix("config.") {
                config.set(key, v)?;
            } else if let Some(name) = k.strip_prefix("tensor.") {
                tensors.push((name.to_string(), v.to_string()));
            } else {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| TrainError::Checkpoint(format!("manifest is missing `{k}`")))
        };
        if get("format")? != FORMAT {
            return Err(TrainError::Checkpoint(format!("unsupported format `{}`", get("format")?)));
        }
        let num = |k: &str| -> Result<usize, TrainError> {
            get(k)?
                .parse()
                .map_err(|_| TrainError::Checkpoint(format!("`{k}` is not a count")))
        };
        let validation_hr = match get("validation_hr")?.as_str() {
            "none" => None,
            s => Some(
                s.parse()
                    .map_err(|_| TrainError::Checkpoint("`validation_hr` is not a number".into()))?,
            ),
        };
        let time_origin = get("time_origin")?
            .parse()
            .map_err(|_| TrainError::Checkpoint("`time_origin` is not an integer".into()))?;

        let mut loaded = Vec::with_capacity(tensors.len());
        for (name, entry) in &tensors {
            let parts: Vec<&str> = entry.split_whitespace().collect();
            let bad = || TrainError::Checkpoint(format!("tensor `{name}`: expected `rows cols file`, got `{entry}`"));
            let [rows, cols, file] = parts[..] else { return Err(bad()) };
            let rows: usize = rows.parse().map_err(|_| bad())?;
            let cols: usize = cols.parse().map_err(|_| bad())?;
            let bytes = fs::read(dir.join(file))?;
            if bytes.len() != rows * cols * 8 {
                return Err(TrainError::Checkpoint(format!(
                    "tensor `{name}`: file holds {} bytes, shape {rows}x{cols} needs {}",
                    bytes.len(),
                    rows * cols * 8
                )));
            }
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            loaded.push(Tensor::from_vec(rows, cols, values)?);
        }
        let params = ModelParams::from_tensors(loaded)
            .ok_or_else(|| TrainError::Checkpoint("unexpected tensor list".into()))?;
        let ckpt = Checkpoint {
            config,
            users: num("users")?,
            items: num("items")?,
            types: num("types")?,
            epoch: num("epoch")?,
            validation_hr,
            time_origin,
            params,
        };
        ckpt.check_compatible(ckpt.users, ckpt.items, ckpt.types)?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = TrainConfig::default();
        Checkpoint {
            params: ModelParams::init(4, 3, 2, config.model.dim, config.model.layers, 9),
            config,
            users: 4,
            items: 3,
            types: 2,
            epoch: 7,
            validation_hr: Some(0.25),
            time_origin: -5,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = sample();
        c.save(dir.path()).unwrap();
        let back = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(back, c);
        let raw = fs::read(dir.path().join("gate.f64")).unwrap();
        assert_eq!(raw.len(), 48 * 8);
    }

    #[test]
    fn shape_mismatch_names_the_tensor() {
        let err = sample().check_compatible(4, 5, 2).unwrap_err().to_string();
        assert!(err.contains("item_embedding") && err.contains("10x16"), "{err}");
    }

    #[test]
    fn truncated_tensor_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path()).unwrap();
        fs::write(dir.path().join("gate.f64"), [0u8; 16]).unwrap();
        assert!(Checkpoint::load(dir.path()).is_err());
    }
}
