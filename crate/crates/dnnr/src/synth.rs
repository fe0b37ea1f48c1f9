//! MIND-shaped synthetic corpora with topical users, for smoke runs and
//! tests where the real dataset is not at hand.
//!
//! Every category owns a set of topic words; titles mix topic words with
//! shared filler. Users favor a few categories both when reading and when
//! clicking impressions.

use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use dnnr_core::mind::{Candidate, MindTime};
use dnnr_core::{ImpressionRecord, NewsItem};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::Corpus;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub news: usize,
    pub types: usize,
    pub categories: usize,
    pub seed: u64,
    pub max_history: usize,
    pub max_impressions: usize,
    pub max_candidates: usize,
    /// Click probability of a candidate from a favored category.
    pub favored_click: f64,
    /// Click probability of any other candidate.
    pub other_click: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 200,
            news: 3000,
            types: 8,
            categories: 48,
            seed: 1,
            max_history: 80,
            max_impressions: 5,
            max_candidates: 20,
            favored_click: 0.45,
            other_click: 0.04,
        }
    }
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ren", "tas", "vo", "pel", "dru", "shi", "gan", "nor", "bet", "qua", "zim",
    "fal", "ost", "ury", "hex", "jo", "wil", "cor", "ade", "ism", "tum",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n)
        .map(|_| *SYLLABLES.choose(rng).expect("non-empty"))
        .collect()
}

fn pick_weighted(
    rng: &mut ChaCha8Rng,
    favored: &[Vec<usize>],
    all: usize,
    p_favored: f64,
) -> usize {
    if rng.random_bool(p_favored) {
        let pool = favored.choose(rng).expect("at least one favored category");
        *pool.choose(rng).expect("categories are non-empty")
    } else {
        rng.random_range(0..all)
    }
}

/// Draws a corpus from `config`. Equal configs give equal corpora.
pub fn generate(config: &SynthConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cats = config.categories.max(1);
    let types = config.types.clamp(1, cats);
    let topic_words: Vec<Vec<String>> = (0..cats)
        .map(|_| (0..12).map(|_| word(&mut rng)).collect())
        .collect();
    let filler: Vec<String> = (0..150).map(|_| word(&mut rng)).collect();

    let mut news = Vec::with_capacity(config.news);
    let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); cats];
    for i in 0..config.news {
        let c = if i < cats {
            i
        } else {
            rng.random_range(0..cats)
        };
        let mut words: Vec<&str> = Vec::new();
        for _ in 0..rng.random_range(3..=5) {
            words.push(topic_words[c].choose(&mut rng).expect("topic words"));
        }
        for _ in 0..rng.random_range(1..=4) {
            words.push(filler.choose(&mut rng).expect("filler"));
        }
        words.shuffle(&mut rng);
        let mut title = words.join(" ");
        if let Some(first) = title.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        by_cat[c].push(i);
        news.push(NewsItem {
            news_id: format!("N{}", 10_000 + i),
            news_type: format!("type{}", c % types),
            news_category: format!("cat{c:03}"),
            title,
        });
    }
    let by_cat: Vec<Vec<usize>> = by_cat.into_iter().filter(|v| !v.is_empty()).collect();

    let start = NaiveDate::from_ymd_opt(2019, 11, 9)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let mut rows: Vec<(i64, ImpressionRecord)> = Vec::new();
    for u in 0..config.users {
        let user_id = format!("U{}", 1000 + u);
        let favored: Vec<Vec<usize>> = (0..rng.random_range(1..=3))
            .map(|_| by_cat.choose(&mut rng).expect("categories").clone())
            .collect();
        let len = rng.random_range(1..=config.max_history.max(1));
        let mut history: Vec<String> = Vec::with_capacity(len);
        for _ in 0..len {
            let id = &news[pick_weighted(&mut rng, &favored, config.news, 0.85)].news_id;
            if !history.contains(id) {
                history.push(id.clone());
            }
        }
        let favored_ids: std::collections::HashSet<usize> =
            favored.iter().flatten().copied().collect();
        let mut minutes: Vec<i64> = (0..rng.random_range(1..=config.max_impressions.max(1)))
            .map(|_| rng.random_range(0..6 * 24 * 60))
            .collect();
        minutes.sort_unstable();
        for m in minutes {
            let n = rng.random_range(2..=config.max_candidates.max(2));
            let mut shown: Vec<usize> = Vec::with_capacity(n);
            for _ in 0..n {
                let i = pick_weighted(&mut rng, &favored, config.news, 0.3);
                if !shown.contains(&i) {
                    shown.push(i);
                }
            }
            let mut candidates: Vec<Candidate> = shown
                .iter()
                .map(|&i| {
                    let p = if favored_ids.contains(&i) {
                        config.favored_click
                    } else {
                        config.other_click
                    };
                    Candidate {
                        news_id: news[i].news_id.clone(),
                        clicked: rng.random_bool(p),
                    }
                })
                .collect();
            if !candidates.iter().any(|c| c.clicked) {
                let k = shown
                    .iter()
                    .position(|i| favored_ids.contains(i))
                    .unwrap_or(0);
                candidates[k].clicked = true;
            }
            let time = MindTime::from_datetime(
                start + Duration::minutes(m) + Duration::seconds(rng.random_range(0..60)),
            );
            rows.push((
                m,
                ImpressionRecord {
                    impression_id: 0,
                    user_id: user_id.clone(),
                    time,
                    history: history.clone(),
                    candidates,
                },
            ));
        }
    }
    rows.sort_by_key(|(m, _)| *m);
    let behaviors = rows
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut r))| {
            r.impression_id = i as u64 + 1;
            r
        })
        .collect();
    Corpus { news, behaviors }
}

/// news.tsv text with MIND's eight columns.
pub fn news_tsv(corpus: &Corpus) -> String {
    let mut out = String::new();
    for n in &corpus.news {
        let _ = writeln!(
            out,
            "{}\t\thttps://example.org/{}\t[]\t[]",
            n.to_tsv_row(),
            n.news_id
        );
    }
    out
}

pub fn behaviors_tsv(corpus: &Corpus) -> String {
    let mut out = String::new();
    for r in &corpus.behaviors {
        out.push_str(&r.to_tsv_row());
        out.push('\n');
    }
    out
}
