//! Text inputs, prepared bundles and embedding export.
//!
//! Input files are UTF-8, tab-separated, one record per line; blank lines
//! and lines starting with `#` are skipped.
//!
//! * interactions: `user  item  type  timestamp`
//! * social ties: `user  user`
//! * item metadata: `item  category`
//!
//! External ids become dense indices in order of first appearance in the
//! interaction file. A prepared bundle is a directory holding the
//! vocabularies, a binary record file (little-endian `u32 user, u32 item,
//! u32 type, i64 timestamp` per record) and plain-text edge lists.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use crate::evaluation::leave_one_out_split;
use crate::graphs::{GraphError, InteractionRecord};
use crate::model::Embeddings;
use crate::training::{Dataset, ItemRelations};

/// Type names for rating-valued datasets, ratings 1 to 5 in order.
pub const RATING_TYPE_NAMES: [&str; 5] = ["negative", "below_average", "neutral", "above_average", "positive"];

const RECORD_BYTES: usize = 20;
const BUNDLE_FORMAT: &str = "kcgn-bundle 1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bundle: {0}")]
    Format(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn read(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), DataError> {
    fs::write(path, contents).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Bijection between external ids and dense indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: impl IntoIterator<Item = String>) -> Result<Self, DataError> {
        let mut v = Vocabulary::new();
        for id in ids {
            if v.get(&id).is_some() {
                return Err(DataError::Format(format!("duplicate id `{id}` in vocabulary")));
            }
            v.insert(&id);
        }
        Ok(v)
    }

    /// Index of `id`, adding it if new.
    pub fn insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn to_text(&self) -> String {
        self.ids.iter().map(|id| format!("{id}\n")).collect()
    }
}

/// Splits data lines into tab-separated fields, with 1-based line numbers.
fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(|(n, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((n + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

/// Options for [`prepare`].
#[derive(Clone, Debug, Default)]
pub struct PrepareOptions {
    /// Map rating values 1..=5 of the type column to [`RATING_TYPE_NAMES`].
    pub rating_types: bool,
    /// Threshold for the co-interaction item graph, used when no item file
    /// is given.
    pub min_common_users: usize,
}

/// Dense-indexed dataset plus the vocabularies that name it.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub users: Vocabulary,
    pub items: Vocabulary,
    pub types: Vocabulary,
    pub categories: Vocabulary,
    pub records: Vec<InteractionRecord>,
    pub social_edges: Vec<(usize, usize)>,
    /// `None` selects the co-interaction item graph.
    pub item_categories: Option<Vec<(usize, usize)>>,
    pub min_common_users: usize,
}

/// Parses the input files into a [`Bundle`]. Social ties and item rows
/// naming ids absent from the interaction file are dropped with a warning.
pub fn prepare(
    interactions: &Path,
    social: Option<&Path>,
    items: Option<&Path>,
    opts: &PrepareOptions,
) -> Result<Bundle, DataError> {
    let parse_err = |path: &Path, line, message: String| DataError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut users = Vocabulary::new();
    let mut item_vocab = Vocabulary::new();
    let mut types = Vocabulary::new();
    if opts.rating_types {
        for name in RATING_TYPE_NAMES {
            types.insert(name);
        }
    }
    let mut recs = Vec::new();
    for (line, f) in records(&read(interactions)?) {
        let [u, j, k, t] = f[..] else {
            return Err(parse_err(interactions, line, format!("expected 4 fields, found {}", f.len())));
        };
        let timestamp: i64 = t
            .parse()
            .map_err(|_| parse_err(interactions, line, format!("timestamp `{t}` is not an integer")))?;
        if timestamp < 0 {
            return Err(parse_err(interactions, line, format!("negative timestamp {timestamp}")));
        }
        let kind = if opts.rating_types {
            match k.parse::<f64>() {
                Ok(r) if (1.0..=5.0).contains(&r) && r.fract() == 0.0 => r as usize - 1,
                _ => return Err(parse_err(interactions, line, format!("rating `{k}` is not an integer in 1..=5"))),
            }
        } else {
            if k.is_empty() {
                return Err(parse_err(interactions, line, "empty type".into()));
            }
            types.insert(k)
        };
        if u.is_empty() || j.is_empty() {
            return Err(parse_err(interactions, line, "empty id".into()));
        }
        recs.push(InteractionRecord::new(users.insert(u), item_vocab.insert(j), kind, timestamp));
    }
    if recs.is_empty() {
        return Err(DataError::Format(format!("{}: no interactions", interactions.display())));
    }

    let mut social_edges = Vec::new();
    if let Some(path) = social {
        let mut dropped = 0;
        for (line, f) in records(&read(path)?) {
            let [a, b] = f[..] else {
                return Err(parse_err(path, line, format!("expected 2 fields, found {}", f.len())));
            };
            match (users.get(a), users.get(b)) {
                (Some(a), Some(b)) => social_edges.push((a, b)),
                _ => dropped += 1,
            }
        }
        if dropped > 0 {
            warn!("dropped {dropped} social tie(s) naming unknown users");
        }
    }

    let mut categories = Vocabulary::new();
    let item_categories = match items {
        Some(path) => {
            let mut pairs = Vec::new();
            let mut dropped = 0;
            for (line, f) in records(&read(path)?) {
                let [j, c] = f[..] else {
                    return Err(parse_err(path, line, format!("expected 2 fields, found {}", f.len())));
                };
                match item_vocab.get(j) {
                    Some(j) => pairs.push((j, categories.insert(c))),
                    None => dropped += 1,
                }
            }
            if dropped > 0 {
                warn!("dropped {dropped} item row(s) naming unknown items");
            }
            Some(pairs)
        }
        None => None,
    };

    Ok(Bundle {
        users,
        items: item_vocab,
        types,
        categories,
        records: recs,
        social_edges,
        item_categories,
        min_common_users: opts.min_common_users.max(1),
    })
}

fn edge_text(edges: &[(usize, usize)]) -> String {
    edges.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect()
}

fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>, DataError> {
    let mut out = Vec::new();
    for (line, f) in records(&read(path)?) {
        let pair = match f[..] {
            [a, b] => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        out.push(pair.ok_or_else(|| DataError::Parse {
            path: path.to_path_buf(),
            line,
            message: "expected two indices".into(),
        })?);
    }
    Ok(out)
}

impl Bundle {
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            users: self.users.len(),
            items: self.items.len(),
            types: self.types.len(),
            records: self.records.clone(),
            social_edges: self.social_edges.clone(),
            item_relations: match &self.item_categories {
                Some(pairs) => ItemRelations::Categories(pairs.clone()),
                None => ItemRelations::CoInteraction {
                    min_common_users: self.min_common_users,
                },
            },
        }
    }

    /// Writes the bundle into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir).map_err(|source| DataError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut bin = Vec::with_capacity(self.records.len() * RECORD_BYTES);
        for r in &self.records {
            for v in [r.user, r.item, r.kind] {
                bin.extend_from_slice(&(v as u32).to_le_bytes());
            }
            bin.extend_from_slice(&r.timestamp.to_le_bytes());
        }
        write(&dir.join("records.bin"), bin)?;
        write(&dir.join("users.txt"), self.users.to_text())?;
        write(&dir.join("items.txt"), self.items.to_text())?;
        write(&dir.join("types.txt"), self.types.to_text())?;
        write(&dir.join("social.tsv"), edge_text(&self.social_edges))?;
        if let Some(pairs) = &self.item_categories {
            write(&dir.join("categories.txt"), self.categories.to_text())?;
            write(&dir.join("item_categories.tsv"), edge_text(pairs))?;
        }

        let split = leave_one_out_split(&self.records, self.users.len(), self.items.len(), self.types.len())?;
        let mut manifest = String::from("user\tvalidation_item\ttest_item\n");
        let mut val = vec![None; self.users.len()];
        let mut test = vec![None; self.users.len()];
        for h in &split.validation {
            val[h.user] = Some(h.item);
        }
        for h in &split.test {
            test[h.user] = Some(h.item);
        }
        let show = |x: Option<usize>| x.map_or_else(|| "-".to_string(), |j| self.items.id(j).to_string());
        for u in 0..self.users.len() {
            let _ = writeln!(manifest, "{}\t{}\t{}", self.users.id(u), show(val[u]), show(test[u]));
        }
        write(&dir.join("split.tsv"), manifest)?;

        let mut meta = String::new();
        let _ = writeln!(meta, "format = {BUNDLE_FORMAT}");
        let _ = writeln!(meta, "users = {}", self.users.len());
        let _ = writeln!(meta, "items = {}", self.items.len());
        let _ = writeln!(meta, "types = {}", self.types.len());
        let _ = writeln!(meta, "records = {}", self.records.len());
        let _ = writeln!(meta, "social_edges = {}", self.social_edges.len());
        let relations = if self.item_categories.is_some() { "categories" } else { "cointeraction" };
        let _ = writeln!(meta, "item_relations = {relations}");
        let _ = writeln!(meta, "min_common_users = {}", self.min_common_users);
        let _ = writeln!(meta, "train_events = {}", split.train.len());
        let _ = writeln!(meta, "validation_events = {}", split.validation.len());
        let _ = writeln!(meta, "test_events = {}", split.test.len());
        write(&dir.join("bundle.txt"), meta)
    }

    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let meta_text = read(&dir.join("bundle.txt"))?;
        let meta: HashMap<&str, &str> = meta_text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let field = |k: &str| {
            meta.get(k)
                .copied()
                .ok_or_else(|| DataError::Format(format!("bundle.txt is missing `{k}`")))
        };
        if field("format")? != BUNDLE_FORMAT {
            return Err(DataError::Format(format!("unsupported format `{}`", field("format")?)));
        }
        let vocab = |name: &str| -> Result<Vocabulary, DataError> {
            Vocabulary::from_ids(read(&dir.join(name))?.lines().map(str::to_string))
        };
        let users = vocab("users.txt")?;
        let items = vocab("items.txt")?;
        let types = vocab("types.txt")?;

        let bin_path = dir.join("records.bin");
        let bin = fs::read(&bin_path).map_err(|source| DataError::Io {
            path: bin_path.clone(),
            source,
        })?;
        if bin.len() % RECORD_BYTES != 0 {
            return Err(DataError::Format(format!("records.bin has {} bytes, not a multiple of {RECORD_BYTES}", bin.len())));
        }
        let u32_at = |c: &[u8], o: usize| u32::from_le_bytes(c[o..o + 4].try_into().expect("4 bytes")) as usize;
        let records: Vec<InteractionRecord> = bin
            .chunks_exact(RECORD_BYTES)
            .map(|c| {
                InteractionRecord::new(
                    u32_at(c, 0),
                    u32_at(c, 4),
                    u32_at(c, 8),
                    i64::from_le_bytes(c[12..20].try_into().expect("8 bytes")),
                )
            })
            .collect();
        crate::graphs::validate_records(&records, users.len(), items.len(), types.len())?;

        let social_edges = parse_edges(&dir.join("social.tsv"))?;
        let (categories, item_categories) = match field("item_relations")? {
            "categories" => (vocab("categories.txt")?, Some(parse_edges(&dir.join("item_categories.tsv"))?)),
            "cointeraction" => (Vocabulary::new(), None),
            other => return Err(DataError::Format(format!("unknown item_relations `{other}`"))),
        };
        let min_common_users = field("min_common_users")?
            .parse()
            .map_err(|_| DataError::Format("`min_common_users` is not a count".into()))?;
        Ok(Bundle {
            users,
            items,
            types,
            categories,
            records,
            social_edges,
            item_categories,
            min_common_users,
        })
    }
}

/// Tab-separated embedding table: `kind  external_id  v1 .. vn`, users
/// first. Values use the shortest representation that parses back to the
/// same `f64`.
pub fn embedding_table(emb: &Embeddings, users: &Vocabulary, items: &Vocabulary) -> String {
    let mut s = String::new();
    for (kind, table, vocab) in [("user", &emb.users, users), ("item", &emb.items, items)] {
        for r in 0..table.rows() {
            let _ = write!(s, "{kind}\t{}", vocab.id(r));
            for v in table.row(r) {
                let _ = write!(s, "\t{v:?}");
            }
            s.push('\n');
        }
    }
    s
}

/// Writes interactions, social ties and item categories of a dense dataset
/// as input text files, naming entities `u<i>`, `i<j>`, `t<k>`, `c<n>`.
pub fn write_text_dataset(data: &Dataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut inter = String::new();
    for r in &data.records {
        let _ = writeln!(inter, "u{}\ti{}\tt{}\t{}", r.user, r.item, r.kind, r.timestamp);
    }
    write(&dir.join("interactions.tsv"), inter)?;
    let social: String = data.social_edges.iter().map(|(a, b)| format!("u{a}\tu{b}\n")).collect();
    write(&dir.join("social.tsv"), social)?;
    if let ItemRelations::Categories(pairs) = &data.item_relations {
        let items: String = pairs.iter().map(|(j, c)| format!("i{j}\tc{c}\n")).collect();
        write(&dir.join("items.tsv"), items)?;
    }
    Ok(())
}
