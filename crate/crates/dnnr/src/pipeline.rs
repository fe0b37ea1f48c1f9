//! Stage wiring: pooling, training and evaluation over a shared read-only
//! workspace. Stages parallelize across users on a bounded thread pool;
//! every per-user RNG is seeded from the run seed and the user id.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use dnnr_core::hashing::user_seed;
use dnnr_core::metrics::{auc, group_auc, Summary};
use dnnr_core::mind::{build_vocab, NewsField};
use dnnr_core::network::Example;
use dnnr_core::sampler::{impressions_pool, random_pool_excluding, synthetic_pool_excluding};
use dnnr_core::{
    EmbeddingStore, FeatureEncoder, FeatureSet, InnerProductIndex, NetworkConfig, NewsItem,
    SamplerKind, SyntheticPool, UserModel, Vocabulary,
};
use rayon::prelude::*;

use crate::error::{DnnrError, Result};
use crate::formats::{embeddings, pools::PoolFile};
use crate::ingest::Corpus;
use crate::protocol::{split_users, UserSplit};
use crate::report::{
    EvalReport, ReportSummary, RunMeta, Stats, Timing, UserResult, FORMAT, VERSION,
};
use crate::timing::{minutes_per_4000_users, timing_probe};

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    File(PathBuf),
    Hash { dim: usize, seed: u64 },
}

impl EmbeddingSource {
    pub fn describe(&self) -> String {
        match self {
            EmbeddingSource::File(p) => format!("file:{}", p.display()),
            EmbeddingSource::Hash { dim, seed } => format!("hash:{dim}:{seed}"),
        }
    }

    pub fn load(&self, catalog: &[NewsItem]) -> Result<EmbeddingStore> {
        match self {
            EmbeddingSource::File(p) => embeddings::load(p),
            EmbeddingSource::Hash { dim, seed } => {
                Ok(EmbeddingStore::from_titles(catalog, *dim, *seed))
            }
        }
    }
}

/// Everything the stages read: the corpus, the normalized embedding store,
/// the negative-sampling index over catalog items, the vocabularies and the
/// per-user splits.
pub struct Workspace {
    pub corpus: Corpus,
    pub store: EmbeddingStore,
    pub index: InnerProductIndex,
    pub types: Vocabulary,
    pub categories: Vocabulary,
    pub splits: Vec<UserSplit>,
    pub merge_clicks: bool,
    pub embedding: String,
    news: HashMap<String, usize>,
}

impl Workspace {
    pub fn new(
        corpus: Corpus,
        mut store: EmbeddingStore,
        merge_clicks: bool,
        embedding: String,
    ) -> Result<Self> {
        let zeros = store.normalize()?;
        if zeros > 0 {
            log::warn!("{zeros} zero embedding rows left out of negative sampling");
        }
        let news: HashMap<String, usize> = corpus
            .news
            .iter()
            .enumerate()
            .map(|(i, n)| (n.news_id.clone(), i))
            .collect();
        let missing = corpus
            .news
            .iter()
            .filter(|n| !store.contains(&n.news_id))
            .count();
        if missing > 0 {
            log::warn!("{missing} catalog items have no embedding");
        }
        let index = InnerProductIndex::from_rows(
            store.dim(),
            store.iter().filter(|(id, _)| news.contains_key(*id)),
        )?;
        let types = build_vocab(&corpus.news, NewsField::Type);
        let categories = build_vocab(&corpus.news, NewsField::Category);
        let splits = split_users(&corpus.behaviors, merge_clicks);
        Ok(Workspace {
            corpus,
            store,
            index,
            types,
            categories,
            splits,
            merge_clicks,
            embedding,
            news,
        })
    }

    pub fn item(&self, id: &str) -> Option<&NewsItem> {
        self.news.get(id).map(|&i| &self.corpus.news[i])
    }

    pub fn encoder(&self, set: FeatureSet) -> FeatureEncoder<'_> {
        FeatureEncoder::new(&self.store, &self.types, &self.categories, set)
    }

    pub fn split(&self, user: &str) -> Option<&UserSplit> {
        self.splits
            .binary_search_by(|s| s.user_id.as_str().cmp(user))
            .ok()
            .map(|i| &self.splits[i])
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DnnrError::Usage(format!("cannot start {workers} workers: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolOptions {
    pub sampler: SamplerKind,
    pub max_samples: usize,
    pub seed: u64,
    pub exclude_test_candidates: bool,
}

pub fn pool_user(
    ws: &Workspace,
    split: &UserSplit,
    opts: &PoolOptions,
) -> dnnr_core::Result<SyntheticPool> {
    let user = split.user_id.as_str();
    let seed = user_seed(opts.seed, user);
    let extra = if opts.exclude_test_candidates {
        split.test_ids()
    } else {
        Vec::new()
    };
    let pool = match opts.sampler {
        SamplerKind::Synthetic => synthetic_pool_excluding(
            user,
            &split.history,
            &extra,
            &ws.index,
            opts.max_samples,
            seed,
        )?,
        SamplerKind::Random => random_pool_excluding(
            user,
            &split.history,
            &extra,
            &ws.index,
            seed,
            opts.max_samples,
        )?,
        SamplerKind::Impressions => {
            let records: Vec<_> = split
                .train_records
                .iter()
                .map(|&i| &ws.corpus.behaviors[i])
                .collect();
            impressions_pool(user, &records, &split.history, opts.max_samples)?
        }
    };
    if pool.is_empty() {
        return Err(dnnr_core::Error::EmptyPool);
    }
    Ok(pool)
}

fn skip_reason(e: &dnnr_core::Error) -> String {
    match e {
        dnnr_core::Error::EmptyHistory(_) => "no usable history".into(),
        dnnr_core::Error::EmptyPool => "empty pool".into(),
        other => other.to_string(),
    }
}

pub fn build_pools(ws: &Workspace, opts: &PoolOptions, threads: &rayon::ThreadPool) -> PoolFile {
    let results: Vec<_> = threads.install(|| {
        ws.splits
            .par_iter()
            .map(|s| (s, pool_user(ws, s, opts)))
            .collect()
    });
    let mut file = PoolFile {
        sampler: opts.sampler,
        max_samples: opts.max_samples,
        seed: opts.seed,
        pools: vec![],
        skipped: vec![],
    };
    for (split, r) in results {
        match r {
            Ok(p) => file.pools.push(p),
            Err(e) => file.skipped.push((split.user_id.clone(), skip_reason(&e))),
        }
    }
    file
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub feature_set: FeatureSet,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub seed: u64,
}

impl TrainOptions {
    pub fn network_config(&self, encoder: &FeatureEncoder<'_>, user: &str) -> NetworkConfig {
        let mut c = NetworkConfig::new(encoder.dim(), encoder.embed_dim());
        c.epochs = self.epochs;
        c.batch_size = self.batch_size;
        c.learning_rate = self.learning_rate;
        c.seed = user_seed(!self.seed, user);
        c
    }
}

/// Feature vectors for a pool. Entries outside the catalog are dropped.
pub fn pool_examples(
    ws: &Workspace,
    encoder: &FeatureEncoder<'_>,
    pool: &SyntheticPool,
) -> dnnr_core::Result<Vec<Example>> {
    let mut out = Vec::with_capacity(pool.len());
    for e in &pool.entries {
        let Some(item) = ws.item(&e.news_id) else {
            log::warn!(
                "user {}: pool item {} not in catalog",
                pool.user_id,
                e.news_id
            );
            continue;
        };
        out.push(Example {
            features: encoder.encode(item)?.values,
            label: f32::from(e.label),
        });
    }
    Ok(out)
}

pub fn train_user(
    user: &str,
    examples: &[Example],
    config: NetworkConfig,
) -> dnnr_core::Result<UserModel> {
    let mut model = UserModel::init(user, config)?;
    model.train(examples)?;
    Ok(model)
}

/// Features, labels and scores of a user's held-out candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

pub fn test_features(
    ws: &Workspace,
    encoder: &FeatureEncoder<'_>,
    split: &UserSplit,
) -> dnnr_core::Result<(Vec<Vec<f32>>, Vec<u8>)> {
    let mut rows = Vec::with_capacity(split.test.len());
    let mut labels = Vec::with_capacity(split.test.len());
    for c in &split.test {
        let Some(item) = ws.item(&c.news_id) else {
            continue;
        };
        rows.push(encoder.encode(item)?.values);
        labels.push(c.label());
    }
    Ok((rows, labels))
}

pub fn score_user(
    ws: &Workspace,
    encoder: &FeatureEncoder<'_>,
    model: &UserModel,
    split: &UserSplit,
) -> dnnr_core::Result<Scored> {
    let (rows, labels) = test_features(ws, encoder, split)?;
    let scores = model.predict(rows.iter().map(Vec::as_slice))?;
    Ok(Scored { labels, scores })
}

/// Individual AUC of a scored user, or why there is none.
pub fn user_auc(scored: &Scored) -> std::result::Result<f64, String> {
    let pos = scored.labels.iter().filter(|&&l| l == 1).count();
    let neg = scored.labels.len() - pos;
    match (pos, neg) {
        (0, 0) => Err("no test candidates".into()),
        (0, _) => Err("no positives in test impressions".into()),
        (_, 0) => Err("no negatives in test impressions".into()),
        _ => auc(&scored.scores, &scored.labels).map_err(|e| e.to_string()),
    }
}

/// Outcome of one user in an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum UserOutcome {
    Scored {
        scored: Scored,
        loss_trace: Vec<f64>,
    },
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pool: PoolOptions,
    pub train: TrainOptions,
    pub workers: usize,
    /// The pooling and prediction stages run this many times and report
    /// their median time. Training always runs once.
    pub timing_repetitions: usize,
}

impl ExperimentConfig {
    pub fn meta(&self, ws: &Workspace) -> RunMeta {
        RunMeta {
            sampler: self.pool.sampler.name().into(),
            feature_set: self.train.feature_set.name().into(),
            max_samples: self.pool.max_samples,
            seed: self.pool.seed,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            merge_clicks: ws.merge_clicks,
            exclude_test_candidates: self.pool.exclude_test_candidates,
            embedding: ws.embedding.clone(),
            input_dim: ws.encoder(self.train.feature_set).dim(),
        }
    }
}

/// Assembles a report from per-user outcomes, ordered by user id.
pub fn assemble_report(
    meta: RunMeta,
    mut outcomes: Vec<(String, usize, UserOutcome)>,
    timing: Timing,
) -> EvalReport {
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));
    let mut users = Vec::with_capacity(outcomes.len());
    let mut groups: Vec<&Scored> = Vec::new();
    let mut trained = 0usize;
    let mut settled = 0usize;
    let mut failed = 0usize;
    for (user_id, candidates, outcome) in &outcomes {
        let (auc, skip_reason) = match outcome {
            UserOutcome::Scored { scored, loss_trace } => {
                trained += 1;
                if let (Some(first), Some(last)) = (loss_trace.first(), loss_trace.last()) {
                    settled += usize::from(last <= first);
                }
                groups.push(scored);
                match user_auc(scored) {
                    Ok(a) => (Some(a), None),
                    Err(r) => (None, Some(r)),
                }
            }
            UserOutcome::Skipped(r) => {
                if r.starts_with("error") {
                    failed += 1;
                }
                (None, Some(r.clone()))
            }
        };
        users.push(UserResult {
            user_id: user_id.clone(),
            auc,
            skip_reason,
            candidates: *candidates,
        });
    }
    let aucs: Vec<f64> = users.iter().filter_map(|u| u.auc).collect();
    let group = group_auc(
        groups
            .iter()
            .map(|s| (s.scores.as_slice(), s.labels.as_slice())),
    )
    .ok();
    let summary = ReportSummary {
        users: users.len(),
        evaluated: aucs.len(),
        skipped: users.len() - aucs.len() - failed,
        failed,
        individual_auc: Summary::of(&aucs).map(Stats::from),
        group_auc: group,
        loss_non_increasing: (trained > 0).then(|| settled as f64 / trained as f64),
    };
    EvalReport {
        format: FORMAT.into(),
        version: VERSION,
        run: meta,
        summary,
        timing,
        users,
    }
}

pub type Pooled = Vec<dnnr_core::Result<Vec<Example>>>;
pub type Trained = Vec<Option<dnnr_core::Result<UserModel>>>;
pub type Predicted = Vec<Option<dnnr_core::Result<Scored>>>;

/// Pool construction plus the pools' feature vectors, per split.
pub fn pooling_stage(
    ws: &Workspace,
    config: &ExperimentConfig,
    threads: &rayon::ThreadPool,
) -> Pooled {
    let encoder = ws.encoder(config.train.feature_set);
    threads.install(|| {
        ws.splits
            .par_iter()
            .map(|s| pool_user(ws, s, &config.pool).and_then(|p| pool_examples(ws, &encoder, &p)))
            .collect()
    })
}

pub fn training_stage(
    ws: &Workspace,
    config: &ExperimentConfig,
    pooled: &Pooled,
    threads: &rayon::ThreadPool,
) -> Trained {
    let encoder = ws.encoder(config.train.feature_set);
    threads.install(|| {
        ws.splits
            .par_iter()
            .zip(pooled.par_iter())
            .map(|(s, ex)| {
                let ex = ex.as_ref().ok()?;
                Some(train_user(
                    &s.user_id,
                    ex,
                    config.train.network_config(&encoder, &s.user_id),
                ))
            })
            .collect()
    })
}

/// Encoding and scoring of the held-out candidates.
pub fn prediction_stage(
    ws: &Workspace,
    config: &ExperimentConfig,
    models: &Trained,
    threads: &rayon::ThreadPool,
) -> Predicted {
    let encoder = ws.encoder(config.train.feature_set);
    threads.install(|| {
        ws.splits
            .par_iter()
            .zip(models.par_iter())
            .map(|(s, m)| match m {
                Some(Ok(m)) => Some(score_user(ws, &encoder, m, s)),
                _ => None,
            })
            .collect()
    })
}

/// Runs `work` for every point `reps[i]` times, cycling through the points
/// so slow drift in machine speed hits all of them alike. Returns each
/// point's last output and median duration.
fn interleaved_medians<T>(
    stage: &str,
    reps: &[usize],
    mut work: impl FnMut(usize) -> T,
) -> Vec<(T, Duration)> {
    let rounds = reps.iter().copied().max().unwrap_or(1).max(1);
    let mut outs: Vec<Option<T>> = reps.iter().map(|_| None).collect();
    let mut times: Vec<Vec<Duration>> = reps.iter().map(|_| Vec::new()).collect();
    for round in 0..rounds {
        for (i, &n) in reps.iter().enumerate() {
            if round < n.max(1) {
                let (v, d) = timing_probe(stage, || work(i));
                outs[i] = Some(v);
                times[i].push(d);
            }
        }
    }
    outs.into_iter()
        .zip(times)
        .map(|(o, mut t)| {
            t.sort_unstable();
            (o.expect("at least one repetition"), t[t.len() / 2])
        })
        .collect()
}

/// Pools, trains and evaluates every user in the workspace.
///
/// Pooling time covers pool construction and materializing the pool's
/// feature vectors; prediction time covers encoding and scoring the held-out
/// candidates.
pub fn run_experiment(ws: &Workspace, config: &ExperimentConfig) -> Result<EvalReport> {
    Ok(run_sweep(ws, std::slice::from_ref(config))?.remove(0))
}

/// [`run_experiment`] for several configurations at once. Timing
/// repetitions of the pooling and prediction stages alternate between the
/// configurations.
pub fn run_sweep(ws: &Workspace, configs: &[ExperimentConfig]) -> Result<Vec<EvalReport>> {
    let mut pools = Vec::with_capacity(configs.len());
    for c in configs {
        c.train
            .network_config(&ws.encoder(c.train.feature_set), "")
            .validate()?;
        pools.push(thread_pool(c.workers)?);
    }
    let reps: Vec<usize> = configs.iter().map(|c| c.timing_repetitions).collect();
    let pooled = interleaved_medians("pooling", &reps, |i| {
        pooling_stage(ws, &configs[i], &pools[i])
    });
    let trained: Vec<_> = configs
        .iter()
        .zip(&pooled)
        .zip(&pools)
        .map(|((c, (p, _)), threads)| {
            timing_probe("training", || training_stage(ws, c, p, threads))
        })
        .collect();
    let scored = interleaved_medians("prediction", &reps, |i| {
        prediction_stage(ws, &configs[i], &trained[i].0, &pools[i])
    });
    let mut reports = Vec::with_capacity(configs.len());
    for (((config, (pooled, pooling)), (models, training)), (scored, predicting)) in
        configs.iter().zip(pooled).zip(trained).zip(scored)
    {
        reports.push(report_for(
            ws,
            config,
            pooled,
            models,
            scored,
            [pooling, training, predicting],
        ));
    }
    Ok(reports)
}

fn report_for(
    ws: &Workspace,
    config: &ExperimentConfig,
    pooled: Pooled,
    models: Trained,
    scored: Predicted,
    [pooling, training, predicting]: [Duration; 3],
) -> EvalReport {
    let mut outcomes = Vec::with_capacity(ws.splits.len());
    for (((split, pool), model), scored) in ws.splits.iter().zip(pooled).zip(models).zip(scored) {
        let outcome = match (pool, model, scored) {
            (Err(e), _, _) => UserOutcome::Skipped(format!("pool: {}", skip_reason(&e))),
            (_, Some(Err(e)), _) => UserOutcome::Skipped(format!("error: {e}")),
            (_, Some(Ok(m)), Some(Ok(scored))) => UserOutcome::Scored {
                scored,
                loss_trace: m.loss_trace,
            },
            (_, _, Some(Err(e))) => UserOutcome::Skipped(format!("error: {e}")),
            _ => unreachable!("every pooled user is trained and scored"),
        };
        outcomes.push((split.user_id.clone(), split.test.len(), outcome));
    }

    let n = ws.splits.len();
    let timing = Timing {
        users: n,
        pooling_seconds: Some(pooling.as_secs_f64()),
        train_seconds: Some(training.as_secs_f64()),
        predict_seconds: Some(predicting.as_secs_f64()),
        pooling_minutes_per_4000_users: Some(minutes_per_4000_users(pooling, n)),
        train_minutes_per_4000_users: Some(minutes_per_4000_users(training, n)),
        predict_minutes_per_4000_users: Some(minutes_per_4000_users(predicting, n)),
    };
    assemble_report(config.meta(ws), outcomes, timing)
}
