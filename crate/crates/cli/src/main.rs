//! `kcgn`: prepare datasets, train, evaluate and export embeddings.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use kcgn::data::{embedding_table, prepare, write_text_dataset, Bundle, PrepareOptions};
use kcgn::evaluation::{evaluate, EvalOptions, DEFAULT_EVAL_NEGATIVES, DEFAULT_TOP_N};
use kcgn::model::Embeddings;
use kcgn::synthetic::{self, PlantedConfig};
use kcgn::training::{fit, history_table, Ablations, Checkpoint, EpochRecord, TrainError, TrainingSetup};

use config::{key_listing, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "kcgn", version, about = "Social recommender on coupled user/item graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse tab-separated input files into a dense-indexed bundle.
    Prepare {
        /// Interactions: `user  item  type  timestamp` per line.
        #[arg(long)]
        interactions: PathBuf,
        /// Social ties: `user  user` per line.
        #[arg(long)]
        social: Option<PathBuf>,
        /// Item metadata: `item  category` per line. Without it, items are
        /// linked by co-interaction.
        #[arg(long)]
        items: Option<PathBuf>,
        /// Treat the type column as a 1-5 rating and map it to five types.
        #[arg(long)]
        rating_types: bool,
        /// Common users needed to link two items when no item file is given.
        #[arg(long, default_value_t = 2)]
        min_common_users: usize,
        /// Bundle directory to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a `key = value` config file.
    #[command(after_help = format!("Config keys:\n{}", key_listing()))]
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Comma list of no_multi_type, no_social, no_item_graph, no_temporal, no_mi.
        /// Replaces the config's `ablate`.
        #[arg(long)]
        ablate: Option<String>,
        /// Overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's `layers`.
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Rank held-out items and write a metrics report.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Cutoff N of HR@N and NDCG@N.
        #[arg(long, default_value_t = DEFAULT_TOP_N)]
        topn: usize,
        /// Sampled negatives per held-out item.
        #[arg(long, default_value_t = DEFAULT_EVAL_NEGATIVES)]
        negatives: usize,
        /// Also report metrics restricted to this interaction type.
        #[arg(long)]
        target_type: Option<String>,
        /// Negative-sampling seed; defaults to the training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Directory for `report.txt` and `report.tsv`; stdout only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write scoring embeddings of every user and item as a TSV table.
    ExportEmbeddings {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic dataset as input text files.
    Synthetic {
        #[arg(long, value_enum, default_value_t = SyntheticKind::Planted)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Test,
    Validation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SyntheticKind {
    /// Communities of users with aligned item categories.
    Planted,
    /// Uniformly random interactions.
    Uniform,
}

/// Marks errors that should exit with code 2.
#[derive(Debug)]
struct Numerical;

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("numerical failure")
    }
}

impl std::error::Error for Numerical {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err.chain().any(|e| {
                e.is::<Numerical>() || e.downcast_ref::<TrainError>().is_some_and(TrainError::is_numerical)
            });
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Prepare {
            interactions,
            social,
            items,
            rating_types,
            min_common_users,
            out,
        } => {
            let opts = PrepareOptions {
                rating_types,
                min_common_users,
            };
            let bundle = prepare(&interactions, social.as_deref(), items.as_deref(), &opts)?;
            bundle.save(&out)?;
            info!(
                "prepared {} records: {} users, {} items, {} types -> {}",
                bundle.records.len(),
                bundle.users.len(),
                bundle.items.len(),
                bundle.types.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train {
            config,
            ablate,
            seed,
            layers,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(list) = ablate {
                cfg.train.ablations = Ablations::parse_list(&list)?;
            }
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            if let Some(layers) = layers {
                cfg.train.model.layers = layers;
            }
            train(&cfg)
        }
        Command::Evaluate {
            checkpoint,
            bundle,
            topn,
            negatives,
            target_type,
            seed,
            split,
            out,
        } => {
            if topn == 0 {
                bail!("--topn must be positive");
            }
            let (ckpt, bundle, setup) = load_model(&checkpoint, &bundle)?;
            let target = target_type
                .map(|name| {
                    bundle
                        .types
                        .get(&name)
                        .ok_or_else(|| anyhow!("unknown type `{name}`; known: {}", bundle.types.ids().join(", ")))
                })
                .transpose()?;
            let base = match split {
                SplitArg::Test => EvalOptions::test(seed.unwrap_or(ckpt.config.seed)),
                SplitArg::Validation => EvalOptions::validation(seed.unwrap_or(ckpt.config.seed)),
            };
            let opts = EvalOptions {
                top_n: topn,
                negatives,
                target_type: target,
                ..base
            };
            let heldout = match split {
                SplitArg::Test => &setup.split.test,
                SplitArg::Validation => &setup.split.validation,
            };
            let report = evaluate(&ckpt.params, &setup.context, &ckpt.config.model, &setup.split, heldout, &opts)?;
            let kv = report.to_key_value(bundle.types.ids());
            print!("{kv}");
            if let Some(dir) = out {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                fs::write(dir.join("report.txt"), &kv)?;
                fs::write(dir.join("report.tsv"), report.to_table(bundle.types.ids()))?;
            }
            Ok(())
        }
        Command::ExportEmbeddings { checkpoint, bundle, out } => {
            let (ckpt, bundle, setup) = load_model(&checkpoint, &bundle)?;
            let emb = Embeddings::compute(&ckpt.params, &setup.context, &ckpt.config.model).map_err(|e| anyhow!(e).context(Numerical))?;
            if !emb.users.is_finite() || !emb.items.is_finite() {
                return Err(anyhow!("embeddings are not finite").context(Numerical));
            }
            fs::write(&out, embedding_table(&emb, &bundle.users, &bundle.items))
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Synthetic { kind, seed, out } => {
            let data = match kind {
                SyntheticKind::Planted => synthetic::planted(&PlantedConfig {
                    communities: 4,
                    users_per_community: 50,
                    items_per_community: 60,
                    types: 3,
                    items_per_user: 12,
                    ties_per_user: 4,
                    seed,
                }),
                SyntheticKind::Uniform => synthetic::uniform(500, 1000, 2, 10, seed),
            };
            write_text_dataset(&data, &out)?;
            Ok(())
        }
    }
}

fn train(cfg: &RunConfig) -> Result<()> {
    let bundle = Bundle::load(&cfg.bundle)?;
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    fs::write(cfg.output.join("config.txt"), cfg.to_text())?;
    let top_n = cfg.train.validation_top_n;
    match fit(&bundle.to_dataset(), &cfg.train) {
        Ok(res) => {
            res.best.save(&cfg.output.join("checkpoint"))?;
            fs::write(cfg.output.join("history.tsv"), history_table(&res.history, top_n))?;
            info!(
                "best epoch {} (validation HR@{top_n} {:?}); checkpoint in {}",
                res.best.epoch,
                res.best.validation_hr,
                cfg.output.join("checkpoint").display()
            );
            Ok(())
        }
        Err(err) => {
            if let TrainError::Diverged { last_good, history, .. } | TrainError::NonFinite { last_good, history, .. } = &err {
                save_partial(cfg, last_good, history, top_n)?;
            }
            Err(err.into())
        }
    }
}

fn save_partial(cfg: &RunConfig, last_good: &Checkpoint, history: &[EpochRecord], top_n: usize) -> Result<()> {
    let dir = cfg.output.join("checkpoint");
    last_good.save(&dir)?;
    fs::write(cfg.output.join("history.tsv"), history_table(history, top_n))?;
    warn!("saved last good checkpoint (epoch {}) to {}", last_good.epoch, dir.display());
    Ok(())
}

fn load_model(checkpoint: &Path, bundle: &Path) -> Result<(Checkpoint, Bundle, TrainingSetup)> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let bundle = Bundle::load(bundle).with_context(|| format!("loading bundle {}", bundle.display()))?;
    let types = if ckpt.config.ablations.no_multi_type { 1 } else { bundle.types.len() };
    ckpt.check_compatible(bundle.users.len(), bundle.items.len(), types)?;
    let setup = TrainingSetup::new(&bundle.to_dataset(), &ckpt.config)?;
    Ok((ckpt, bundle, setup))
}
