//! The `dnnr` command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use dnnr_core::metrics::Summary;
use dnnr_core::UserModel;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{DnnrError, Result};
use crate::formats::model::{self, ManifestEntry, ManifestSkip, ModelManifest, MANIFEST_FORMAT};
use crate::formats::{embeddings, pools::PoolFile, store};
use crate::fsutil;
use crate::ingest::{Corpus, CorpusStats};
use crate::pipeline::{
    self, assemble_report, pool_examples, run_experiment, run_sweep, score_user, thread_pool,
    train_user, ExperimentConfig, UserOutcome, Workspace,
};
use crate::report::{EvalReport, Timing};
use crate::synth::{self, SynthConfig};
use crate::timing::{minutes_per_4000_users, timing_probe};

#[derive(Debug, Parser)]
#[command(
    name = "dnnr",
    version,
    about = "Per-user neural news recommendation on MIND-format data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(self.run.clone()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse news and behaviors, print corpus statistics, optionally save a store.
    Ingest(Common),
    /// Build per-user training pools and write them to --pools.
    Pool(Common),
    /// Train one model per pooled user into --models.
    Train(Common),
    /// Score held-out impressions and write reports to --reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Run the full pipeline once per value, e.g. `max-samples=15,30,60,120`.
        /// Repeat to sweep a grid.
        #[arg(long)]
        sweep: Vec<String>,
    },
    /// Time the full pipeline over repeated runs.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sweep: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// Write a synthetic MIND-format corpus.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 3000)]
        news: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write hash embeddings of every title in a news.tsv as a DNNR-EMB file.
    EmbedHash {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(c) => cmd_ingest(&c.resolve()?),
        Command::Pool(c) => cmd_pool(&c.resolve()?),
        Command::Train(c) => cmd_train(&c.resolve()?),
        Command::Evaluate { common, sweep } => cmd_evaluate(&common.resolve()?, &sweep),
        Command::Benchmark {
            common,
            sweep,
            repetitions,
        } => cmd_benchmark(&common.resolve()?, &sweep, repetitions),
        Command::Synth {
            out_dir,
            users,
            news,
            seed,
        } => cmd_synth(&out_dir, users, news, seed),
        Command::EmbedHash { common, out } => cmd_embed_hash(&common.resolve()?, &out),
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| DnnrError::Usage(format!("--{flag} is required")))
}

/// Corpus from raw TSV, subsampled to `user_limit`.
pub fn read_tsv_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let mut corpus = Corpus::load(&cfg.news_path()?, &cfg.behaviors_path()?, cfg.parse_mode()?)?;
    if let Some(limit) = cfg.user_limit {
        corpus.subsample_users(limit, cfg.seed());
    }
    Ok(corpus)
}

/// Corpus from `--store` when given, else from raw TSV.
pub fn read_corpus(cfg: &RunConfig) -> Result<Corpus> {
    match &cfg.store {
        Some(p) => {
            let mut corpus = store::load(p)?;
            if let Some(limit) = cfg.user_limit {
                corpus.subsample_users(limit, cfg.seed());
            }
            Ok(corpus)
        }
        None => read_tsv_corpus(cfg),
    }
}

pub fn load_workspace(cfg: &RunConfig) -> Result<Workspace> {
    let corpus = read_corpus(cfg)?;
    let source = cfg.embedding_source()?;
    let store = source.load(&corpus.news)?;
    Workspace::new(corpus, store, cfg.merge_clicks(), source.describe())
}

fn print_stats(s: &CorpusStats) {
    println!("users        {}", s.users);
    println!("news         {}", s.news);
    println!("impressions  {}", s.impressions);
    println!("clicks       {}", s.clicks);
    println!("non-clicks   {}", s.non_clicks);
    println!("types        {}", s.types);
    println!("categories   {}", s.categories);
    let row = |name: &str, s: &Option<Summary>| {
        if let Some(s) = s {
            println!(
                "{name:<16} mean {:.2}  std {:.2}  min {}  q1 {}  median {}  q3 {}  max {}",
                s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max
            );
        }
    };
    row("items read", &s.items_read);
    row("types read", &s.types_read);
    row("categories read", &s.categories_read);
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let (corpus, elapsed) = timing_probe("ingest", || read_tsv_corpus(cfg));
    let corpus = corpus?;
    print_stats(&corpus.stats(cfg.merge_clicks()));
    println!("ingest time  {:.2} s", elapsed.as_secs_f64());
    if let Some(p) = &cfg.store {
        store::save(p, &corpus)?;
        println!("store        {}", p.display());
    }
    Ok(())
}

pub fn cmd_pool(cfg: &RunConfig) -> Result<()> {
    let out = require(&cfg.pools, "pools")?;
    let opts = cfg.pool_options()?;
    let ws = load_workspace(cfg)?;
    let threads = thread_pool(cfg.workers())?;
    let (file, elapsed) = timing_probe("pooling", || pipeline::build_pools(&ws, &opts, &threads));
    file.save(out)?;
    println!(
        "pools        {} ({} skipped)",
        file.pools.len(),
        file.skipped.len()
    );
    println!(
        "pooling time {:.3} s ({:.3} min per 4000 users)",
        elapsed.as_secs_f64(),
        minutes_per_4000_users(elapsed, ws.splits.len())
    );
    println!("pool file    {}", out.display());
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let pools_path = require(&cfg.pools, "pools")?;
    let dir = require(&cfg.models, "models")?;
    let pools = PoolFile::load(pools_path)?;
    if pools.pools.is_empty() {
        return Err(DnnrError::Data(format!(
            "{}: pool file holds no pools",
            pools_path.display()
        )));
    }
    let opts = cfg.train_options()?;
    let ws = load_workspace(cfg)?;
    let encoder = ws.encoder(opts.feature_set);
    opts.network_config(&encoder, "").validate()?;
    let threads = thread_pool(cfg.workers())?;
    let (results, elapsed) = timing_probe("training", || {
        threads.install(|| {
            pools
                .pools
                .par_iter()
                .map(|p| {
                    let model = pool_examples(&ws, &encoder, p).and_then(|ex| {
                        train_user(&p.user_id, &ex, opts.network_config(&encoder, &p.user_id))
                    })?;
                    let file = model::file_name(&p.user_id);
                    model::save(&dir.join(&file), &model)
                        .map_err(|e| dnnr_core::Error::Config(e.to_string()))?;
                    Ok::<_, dnnr_core::Error>(file)
                })
                .collect::<Vec<_>>()
        })
    });
    let mut manifest = ModelManifest {
        format: MANIFEST_FORMAT.into(),
        version: model::VERSION,
        sampler: pools.sampler.name().into(),
        feature_set: opts.feature_set.name().into(),
        max_samples: pools.max_samples,
        seed: opts.seed,
        input_dim: encoder.dim(),
        embed_dim: encoder.embed_dim(),
        users: vec![],
        skipped: pools
            .skipped
            .iter()
            .map(|(u, r)| ManifestSkip {
                user: u.clone(),
                reason: format!("pool: {r}"),
            })
            .collect(),
    };
    for (p, r) in pools.pools.iter().zip(results) {
        match r {
            Ok(file) => manifest.users.push(ManifestEntry {
                user: p.user_id.clone(),
                file,
            }),
            Err(e) => {
                log::warn!("user {}: {e}", p.user_id);
                manifest.skipped.push(ManifestSkip {
                    user: p.user_id.clone(),
                    reason: format!("error: {e}"),
                });
            }
        }
    }
    manifest.users.sort_by(|a, b| a.user.cmp(&b.user));
    manifest.skipped.sort_by(|a, b| a.user.cmp(&b.user));
    std::fs::create_dir_all(dir).map_err(|e| DnnrError::io(dir, e))?;
    manifest.save(dir)?;
    println!(
        "models       {} ({} skipped)",
        manifest.users.len(),
        manifest.skipped.len()
    );
    println!(
        "train time   {:.3} s ({:.3} min per 4000 users)",
        elapsed.as_secs_f64(),
        minutes_per_4000_users(elapsed, pools.pools.len())
    );
    Ok(())
}

/// Parses `--sweep key=v1,v2` flags into one config per grid point.
pub fn expand_sweep(base: &RunConfig, sweeps: &[String]) -> Result<Vec<RunConfig>> {
    let mut grid = vec![base.clone()];
    for s in sweeps {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| DnnrError::Usage(format!("--sweep `{s}`: expected key=v1,v2,...")))?;
        let values: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(DnnrError::Usage(format!("--sweep `{s}`: no values")));
        }
        let mut next = Vec::new();
        for cfg in &grid {
            for v in &values {
                let mut c = cfg.clone();
                let bad = |_| DnnrError::Usage(format!("--sweep {key}: bad value `{v}`"));
                match key.replace('_', "-").as_str() {
                    "max-samples" => c.max_samples = Some(v.parse().map_err(bad)?),
                    "feature-set" => c.feature_set = Some(v.to_string()),
                    "sampler" => c.sampler = Some(v.to_string()),
                    "seed" => c.seed = Some(v.parse().map_err(bad)?),
                    "epochs" => c.epochs = Some(v.parse().map_err(bad)?),
                    other => {
                        return Err(DnnrError::Usage(format!("--sweep: cannot sweep `{other}`")))
                    }
                }
                next.push(c);
            }
        }
        grid = next;
    }
    Ok(grid)
}

pub fn experiment_config(cfg: &RunConfig) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        pool: cfg.pool_options()?,
        train: cfg.train_options()?,
        workers: cfg.workers(),
        timing_repetitions: 1,
    })
}

fn print_report(r: &EvalReport) {
    let s = &r.summary;
    print!(
        "{:<12} {:<6} m={:<4}",
        r.run.sampler, r.run.feature_set, r.run.max_samples
    );
    match &s.individual_auc {
        Some(a) => print!(
            " auc mean {:.4} median {:.4} std {:.4}",
            a.mean, a.median, a.std
        ),
        None => print!(" auc n/a"),
    }
    match s.group_auc {
        Some(g) => print!(" group {g:.4}"),
        None => print!(" group n/a"),
    }
    print!(" users {}/{}", s.evaluated, s.users);
    let t = &r.timing;
    let m = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        " | min/4000 users: pool {} train {} predict {}",
        m(t.pooling_minutes_per_4000_users),
        m(t.train_minutes_per_4000_users),
        m(t.predict_minutes_per_4000_users)
    );
}

/// Scores saved models against the workspace's held-out impressions.
pub fn evaluate_models(ws: &Workspace, cfg: &RunConfig, dir: &Path) -> Result<EvalReport> {
    let manifest = ModelManifest::load(dir)?;
    let feature_set = manifest.feature_set.parse()?;
    if cfg.feature_set.is_some() && cfg.feature_set()? != feature_set {
        log::warn!(
            "models were trained on {}; ignoring --feature-set",
            manifest.feature_set
        );
    }
    let encoder = ws.encoder(feature_set);
    if encoder.dim() != manifest.input_dim {
        return Err(dnnr_core::Error::DimensionMismatch {
            expected: manifest.input_dim,
            found: encoder.dim(),
        }
        .into());
    }
    let files: BTreeMap<&str, &str> = manifest
        .users
        .iter()
        .map(|e| (e.user.as_str(), e.file.as_str()))
        .collect();
    let skips: BTreeMap<&str, &str> = manifest
        .skipped
        .iter()
        .map(|e| (e.user.as_str(), e.reason.as_str()))
        .collect();
    let models: Vec<Option<UserModel>> = ws
        .splits
        .iter()
        .map(|s| {
            files
                .get(s.user_id.as_str())
                .map(|f| model::load(&dir.join(f)))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let threads = thread_pool(cfg.workers())?;
    let (scored, elapsed) = timing_probe("prediction", || {
        threads.install(|| {
            ws.splits
                .par_iter()
                .zip(models.par_iter())
                .map(|(s, m)| m.as_ref().map(|m| score_user(ws, &encoder, m, s)))
                .collect::<Vec<_>>()
        })
    });
    let mut outcomes = Vec::new();
    for ((split, model), scored) in ws.splits.iter().zip(&models).zip(scored) {
        let outcome = match (model, scored) {
            (Some(m), Some(Ok(scored))) => UserOutcome::Scored {
                scored,
                loss_trace: m.loss_trace.clone(),
            },
            (_, Some(Err(e))) => UserOutcome::Skipped(format!("error: {e}")),
            _ => UserOutcome::Skipped(
                skips
                    .get(split.user_id.as_str())
                    .map_or("no model".into(), |r| r.to_string()),
            ),
        };
        outcomes.push((split.user_id.clone(), split.test.len(), outcome));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.sampler = Some(manifest.sampler.clone());
    run_cfg.feature_set = Some(manifest.feature_set.clone());
    run_cfg.max_samples = Some(manifest.max_samples);
    run_cfg.seed = Some(manifest.seed);
    let meta = experiment_config(&run_cfg)?.meta(ws);
    let n = ws.splits.len();
    let timing = Timing {
        users: n,
        predict_seconds: Some(elapsed.as_secs_f64()),
        predict_minutes_per_4000_users: Some(minutes_per_4000_users(elapsed, n)),
        ..Timing::default()
    };
    Ok(assemble_report(meta, outcomes, timing))
}

pub fn cmd_evaluate(cfg: &RunConfig, sweeps: &[String]) -> Result<()> {
    let reports_dir = cfg
        .reports
        .clone()
        .unwrap_or_else(|| PathBuf::from("reports"));
    let ws = load_workspace(cfg)?;
    if let (Some(dir), true) = (&cfg.models, sweeps.is_empty()) {
        let report = evaluate_models(&ws, cfg, dir)?;
        report.save(&reports_dir)?;
        print_report(&report);
        return Ok(());
    }
    for point in expand_sweep(cfg, sweeps)? {
        let report = run_experiment(&ws, &experiment_config(&point)?)?;
        report.save(&reports_dir)?;
        print_report(&report);
    }
    println!("reports      {}", reports_dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRun {
    pub sampler: String,
    pub feature_set: String,
    pub max_samples: usize,
    pub users: usize,
    pub mean_individual_auc: Option<f64>,
    pub group_auc: Option<f64>,
    pub repetitions: Vec<Timing>,
    /// Mean and sample standard deviation over repetitions, in minutes per
    /// 4,000 users.
    pub pooling: Option<(f64, f64)>,
    pub train: Option<(f64, f64)>,
    pub predict: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub format: &'static str,
    pub version: u32,
    pub runs: Vec<BenchmarkRun>,
}

fn mean_std(values: impl Iterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let v: Option<Vec<f64>> = values.collect();
    Summary::of(&v?).map(|s| (s.mean, s.std))
}

pub fn benchmark(
    ws: &Workspace,
    configs: &[RunConfig],
    repetitions: usize,
) -> Result<BenchmarkReport> {
    if repetitions == 0 {
        return Err(DnnrError::Usage("--repetitions must be positive".into()));
    }
    let exps = configs
        .iter()
        .map(experiment_config)
        .collect::<Result<Vec<_>>>()?;
    // Whole sweeps are repeated so every configuration sees the same drift.
    let mut by_config: Vec<Vec<EvalReport>> = exps
        .iter()
        .map(|_| Vec::with_capacity(repetitions))
        .collect();
    for _ in 0..repetitions {
        for (all, r) in by_config.iter_mut().zip(run_sweep(ws, &exps)?) {
            all.push(r);
        }
    }
    let mut runs = Vec::new();
    for reports in by_config {
        let timings: Vec<Timing> = reports.iter().map(|r| r.timing.clone()).collect();
        let first = &reports[0];
        runs.push(BenchmarkRun {
            sampler: first.run.sampler.clone(),
            feature_set: first.run.feature_set.clone(),
            max_samples: first.run.max_samples,
            users: first.summary.users,
            mean_individual_auc: first.mean_auc(),
            group_auc: first.summary.group_auc,
            pooling: mean_std(timings.iter().map(|t| t.pooling_minutes_per_4000_users)),
            train: mean_std(timings.iter().map(|t| t.train_minutes_per_4000_users)),
            predict: mean_std(timings.iter().map(|t| t.predict_minutes_per_4000_users)),
            repetitions: timings,
        });
    }
    Ok(BenchmarkReport {
        format: "dnnr-benchmark",
        version: 1,
        runs,
    })
}

pub fn cmd_benchmark(cfg: &RunConfig, sweeps: &[String], repetitions: usize) -> Result<()> {
    let ws = load_workspace(cfg)?;
    let report = benchmark(&ws, &expand_sweep(cfg, sweeps)?, repetitions)?;
    let ms = |v: Option<(f64, f64)>| v.map_or("-".into(), |(m, s)| format!("{m:.3} ± {s:.3}"));
    println!("minutes per 4000 users, mean ± std over {repetitions} runs");
    for r in &report.runs {
        println!(
            "{:<12} {:<6} m={:<4} pool {} train {} predict {} | auc {} group {}",
            r.sampler,
            r.feature_set,
            r.max_samples,
            ms(r.pooling),
            ms(r.train),
            ms(r.predict),
            r.mean_individual_auc
                .map_or("-".into(), |a| format!("{a:.4}")),
            r.group_auc.map_or("-".into(), |a| format!("{a:.4}")),
        );
    }
    let dir = cfg
        .reports
        .clone()
        .unwrap_or_else(|| PathBuf::from("reports"));
    let mut text = serde_json::to_string_pretty(&report).expect("benchmark serializes");
    text.push('\n');
    fsutil::write_atomic(&dir.join("benchmark.json"), text.as_bytes())?;
    Ok(())
}

pub fn cmd_synth(dir: &Path, users: usize, news: usize, seed: u64) -> Result<()> {
    let corpus = synth::generate(&SynthConfig {
        users,
        news,
        seed,
        ..SynthConfig::default()
    });
    fsutil::write_atomic(&dir.join("news.tsv"), synth::news_tsv(&corpus).as_bytes())?;
    fsutil::write_atomic(
        &dir.join("behaviors.tsv"),
        synth::behaviors_tsv(&corpus).as_bytes(),
    )?;
    println!(
        "wrote {} news and {} impressions to {}",
        corpus.news.len(),
        corpus.behaviors.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_embed_hash(cfg: &RunConfig, out: &Path) -> Result<()> {
    let path = cfg.news_path()?;
    let f = std::fs::File::open(&path).map_err(|e| DnnrError::io(&path, e))?;
    let (news, _) = crate::ingest::parse_news(
        std::io::BufReader::new(f),
        &path.display().to_string(),
        cfg.parse_mode()?,
    )?;
    let store = dnnr_core::EmbeddingStore::from_titles(
        &news,
        cfg.embed_dim
            .unwrap_or(dnnr_core::features::DEFAULT_EMBED_DIM),
        cfg.seed(),
    );
    embeddings::save(out, &store)?;
    println!(
        "wrote {} vectors of dim {} to {}",
        store.len(),
        store.dim(),
        out.display()
    );
    Ok(())
}
