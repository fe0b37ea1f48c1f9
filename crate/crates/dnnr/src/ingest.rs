//! Reading MIND news.tsv and behaviors.tsv into memory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use dnnr_core::metrics::Summary;
use dnnr_core::mind::{self, build_user_history, parse_behavior_line, parse_news_line};
use dnnr_core::{ImpressionRecord, NewsItem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DnnrError, Result};

/// What to do with a row that does not parse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    #[default]
    Skip,
}

impl FromStr for ParseMode {
    type Err = DnnrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(ParseMode::Strict),
            "skip" => Ok(ParseMode::Skip),
            other => Err(DnnrError::Usage(format!(
                "unknown parse mode `{other}` (strict or skip)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rows: usize,
    pub skipped: usize,
    pub duplicates: usize,
}

fn for_each_line(
    input: impl BufRead,
    source: &str,
    mode: ParseMode,
    report: &mut ParseReport,
    mut row: impl FnMut(&str) -> dnnr_core::Result<()>,
) -> Result<()> {
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| DnnrError::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match row(&line) {
            Ok(()) => report.rows += 1,
            Err(source_err) => {
                let err = DnnrError::Record {
                    source_name: source.to_string(),
                    line: i + 1,
                    source: source_err,
                };
                if mode == ParseMode::Strict {
                    return Err(err);
                }
                log::warn!("skipping {err}");
                report.skipped += 1;
            }
        }
    }
    Ok(())
}

/// Parses a news.tsv stream. A repeated id replaces the earlier row in place.
pub fn parse_news(
    input: impl BufRead,
    source: &str,
    mode: ParseMode,
) -> Result<(Vec<NewsItem>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut items: Vec<NewsItem> = Vec::new();
    let mut at: HashMap<String, usize> = HashMap::new();
    for_each_line(input, source, mode, &mut report, |line| {
        let item = parse_news_line(line)?;
        match at.get(&item.news_id) {
            Some(&i) => {
                log::warn!(
                    "{source}: duplicate news id {}, keeping the later row",
                    item.news_id
                );
                items[i] = item;
            }
            None => {
                at.insert(item.news_id.clone(), items.len());
                items.push(item);
            }
        }
        Ok(())
    })?;
    report.duplicates = report.rows - items.len();
    log::info!("{source}: {} news items", items.len());
    Ok((items, report))
}

pub fn parse_behaviors(
    input: impl BufRead,
    source: &str,
    mode: ParseMode,
) -> Result<(Vec<ImpressionRecord>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for_each_line(input, source, mode, &mut report, |line| {
        records.push(parse_behavior_line(line)?);
        Ok(())
    })?;
    log::info!("{source}: {} impressions", records.len());
    Ok((records, report))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| DnnrError::io(path, e))
}

/// Catalog plus behavior log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub news: Vec<NewsItem>,
    pub behaviors: Vec<ImpressionRecord>,
}

/// Table-1 style counts plus per-user reading summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub users: usize,
    pub news: usize,
    pub impressions: usize,
    pub clicks: usize,
    pub non_clicks: usize,
    pub types: usize,
    pub categories: usize,
    pub items_read: Option<Summary>,
    pub types_read: Option<Summary>,
    pub categories_read: Option<Summary>,
}

impl Corpus {
    pub fn load(news: &Path, behaviors: &Path, mode: ParseMode) -> Result<Self> {
        let (news, _) = parse_news(open(news)?, &news.display().to_string(), mode)?;
        let (behaviors, _) =
            parse_behaviors(open(behaviors)?, &behaviors.display().to_string(), mode)?;
        Ok(Corpus { news, behaviors })
    }

    pub fn users(&self) -> BTreeSet<&str> {
        self.behaviors.iter().map(|r| r.user_id.as_str()).collect()
    }

    /// Keeps the behaviors of `limit` users drawn without replacement from
    /// the sorted user list. The catalog is kept whole.
    pub fn subsample_users(&mut self, limit: usize, seed: u64) {
        let users: Vec<String> = self.users().into_iter().map(str::to_string).collect();
        if limit >= users.len() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep: BTreeSet<&str> = rand::seq::index::sample(&mut rng, users.len(), limit)
            .into_iter()
            .map(|i| users[i].as_str())
            .collect();
        self.behaviors.retain(|r| keep.contains(r.user_id.as_str()));
    }

    pub fn stats(&self, merge_clicks: bool) -> CorpusStats {
        let (clicks, shown) = self.behaviors.iter().fold((0, 0), |(c, n), r| {
            (
                c + r.candidates.iter().filter(|c| c.clicked).count(),
                n + r.candidates.len(),
            )
        });
        let by_id: HashMap<&str, &NewsItem> =
            self.news.iter().map(|n| (n.news_id.as_str(), n)).collect();
        let histories = build_user_history(&self.behaviors, merge_clicks);
        let mut read = Vec::new();
        let mut types_read = Vec::new();
        let mut cats_read = Vec::new();
        for items in histories.values() {
            read.push(items.len() as f64);
            let known: Vec<&&NewsItem> = items
                .iter()
                .filter_map(|id| by_id.get(id.as_str()))
                .collect();
            types_read.push(
                known
                    .iter()
                    .map(|n| n.news_type.as_str())
                    .collect::<BTreeSet<_>>()
                    .len() as f64,
            );
            cats_read.push(
                known
                    .iter()
                    .map(|n| n.news_category.as_str())
                    .collect::<BTreeSet<_>>()
                    .len() as f64,
            );
        }
        CorpusStats {
            users: histories.len(),
            news: self.news.len(),
            impressions: self.behaviors.len(),
            clicks,
            non_clicks: shown - clicks,
            types: mind::build_vocab(&self.news, mind::NewsField::Type).len(),
            categories: mind::build_vocab(&self.news, mind::NewsField::Category).len(),
            items_read: Summary::of(&read),
            types_read: Summary::of(&types_read),
            categories_read: Summary::of(&cats_read),
        }
    }

    pub fn news_index(&self) -> BTreeMap<&str, &NewsItem> {
        self.news.iter().map(|n| (n.news_id.as_str(), n)).collect()
    }
}
