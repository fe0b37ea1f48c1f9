//! Run configuration: a TOML file whose keys mirror the command-line flags
//! (snake_case in the file, kebab-case on the command line). Flags win over
//! the file; unset values take the defaults below.
//!
//! ```toml
//! news = "MINDsmall_train/news.tsv"
//! behaviors = "MINDsmall_train/behaviors.tsv"
//! embeddings = "mind-small.dnnremb"
//! sampler = "synthetic"
//! feature_set = "EmbTC"
//! max_samples = 60
//! seed = 7
//! workers = 8
//! user_limit = 1000
//! ```
//!
//! When `news` or `behaviors` is unset they default to `news.tsv` and
//! `behaviors.tsv` under `$DNNR_DATA_ROOT`.

use std::path::{Path, PathBuf};

use clap::Args;
use dnnr_core::network::{DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE};
use dnnr_core::sampler::DEFAULT_MAX_SAMPLES;
use dnnr_core::{FeatureSet, SamplerKind};
use serde::Deserialize;

use crate::error::{DnnrError, Result};
use crate::ingest::ParseMode;
use crate::pipeline::{EmbeddingSource, PoolOptions, TrainOptions};

pub const DATA_ROOT_ENV: &str = "DNNR_DATA_ROOT";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// news.tsv of a MIND split.
    #[arg(long)]
    pub news: Option<PathBuf>,
    /// behaviors.tsv of a MIND split.
    #[arg(long)]
    pub behaviors: Option<PathBuf>,
    /// Ingested corpus file (written by `ingest`, read by later stages).
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// DNNR-EMB embedding file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Pool file (written by `pool`, read by `train`).
    #[arg(long)]
    pub pools: Option<PathBuf>,
    /// Directory of per-user model files.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Directory for reports.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// synthetic, random or impressions.
    #[arg(long)]
    pub sampler: Option<String>,
    /// Emb, TC, EmbC, EmbT or EmbTC.
    #[arg(long)]
    pub feature_set: Option<String>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Keep only this many users, drawn with the run seed.
    #[arg(long)]
    pub user_limit: Option<usize>,
    /// file or hash. Defaults to file when --embeddings is given.
    #[arg(long)]
    pub embedding_mode: Option<String>,
    /// Dimension of hash embeddings.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Count clicked impression candidates as reads.
    #[arg(long)]
    pub merge_clicks: Option<bool>,
    /// Keep a user's held-out candidates out of their sampled negatives.
    #[arg(long)]
    pub exclude_test_candidates: Option<bool>,
    /// strict or skip.
    #[arg(long)]
    pub parse_mode: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

fn parse<T: std::str::FromStr<Err = dnnr_core::Error>>(
    v: &Option<String>,
    default: T,
) -> Result<T> {
    match v {
        Some(s) => s
            .parse()
            .map_err(|e: dnnr_core::Error| DnnrError::Usage(e.to_string())),
        None => Ok(default),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DnnrError::io(path, e))?;
        Self::from_toml(&text).map_err(|m| DnnrError::Usage(format!("{}: {m}", path.display())))
    }

    /// `self` with every field that is set in `top` replaced.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, top; news, behaviors, store, embeddings, pools, models, reports, sampler, feature_set,
            max_samples, epochs, batch_size, learning_rate, seed, workers, user_limit, embedding_mode, embed_dim,
            merge_clicks, exclude_test_candidates, parse_mode)
    }

    fn data_path(&self, given: &Option<PathBuf>, name: &str, flag: &str) -> Result<PathBuf> {
        if let Some(p) = given {
            return Ok(p.clone());
        }
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) => Ok(Path::new(&root).join(name)),
            None => Err(DnnrError::Usage(format!(
                "--{flag} is required (or set {DATA_ROOT_ENV})"
            ))),
        }
    }

    pub fn news_path(&self) -> Result<PathBuf> {
        self.data_path(&self.news, "news.tsv", "news")
    }

    pub fn behaviors_path(&self) -> Result<PathBuf> {
        self.data_path(&self.behaviors, "behaviors.tsv", "behaviors")
    }

    pub fn sampler(&self) -> Result<SamplerKind> {
        parse(&self.sampler, SamplerKind::Synthetic)
    }

    pub fn feature_set(&self) -> Result<FeatureSet> {
        parse(&self.feature_set, FeatureSet::EmbTC)
    }

    pub fn max_samples(&self) -> usize {
        self.max_samples.unwrap_or(DEFAULT_MAX_SAMPLES)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn merge_clicks(&self) -> bool {
        self.merge_clicks.unwrap_or(true)
    }

    pub fn parse_mode(&self) -> Result<ParseMode> {
        self.parse_mode
            .as_deref()
            .map_or(Ok(ParseMode::Skip), str::parse)
    }

    pub fn embedding_source(&self) -> Result<EmbeddingSource> {
        let hash = EmbeddingSource::Hash {
            dim: self
                .embed_dim
                .unwrap_or(dnnr_core::features::DEFAULT_EMBED_DIM),
            seed: self.seed(),
        };
        match (self.embedding_mode.as_deref(), &self.embeddings) {
            (Some("hash"), _) | (None, None) => Ok(hash),
            (Some("file") | None, Some(p)) => Ok(EmbeddingSource::File(p.clone())),
            (Some("file"), None) => Err(DnnrError::Usage(
                "--embedding-mode file needs --embeddings".into(),
            )),
            (Some(other), _) => Err(DnnrError::Usage(format!(
                "unknown embedding mode `{other}` (file or hash)"
            ))),
        }
    }

    pub fn pool_options(&self) -> Result<PoolOptions> {
        let max_samples = self.max_samples();
        if max_samples == 0 {
            return Err(DnnrError::Usage("--max-samples must be positive".into()));
        }
        Ok(PoolOptions {
            sampler: self.sampler()?,
            max_samples,
            seed: self.seed(),
            exclude_test_candidates: self.exclude_test_candidates.unwrap_or(false),
        })
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        Ok(TrainOptions {
            feature_set: self.feature_set()?,
            epochs: self.epochs.unwrap_or(DEFAULT_EPOCHS),
            batch_size: self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            learning_rate: self.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE),
            seed: self.seed(),
        })
    }
}
