use std::fs;
use std::path::{Path, PathBuf};

use dnnr::formats::store;
use dnnr::ingest::{parse_behaviors, parse_news, Corpus, ParseMode};
use dnnr_core::mind::{build_user_history, build_vocab, NewsField};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn behaviors_fixture_round_trips_byte_exactly() {
    let text = fs::read_to_string(fixture("behaviors.tsv")).unwrap();
    let (records, report) =
        parse_behaviors(text.as_bytes(), "behaviors.tsv", ParseMode::Strict).unwrap();
    assert_eq!(records.len(), 1000);
    assert_eq!(report.skipped, 0);
    let mut out = String::new();
    for r in &records {
        out.push_str(&r.to_tsv_row());
        out.push('\n');
    }
    assert_eq!(out, text);
    assert!(records.iter().any(|r| r.history.is_empty()));
}

#[test]
fn news_fixture_keeps_the_four_leading_columns() {
    let text = fs::read_to_string(fixture("news.tsv")).unwrap();
    let (items, _) = parse_news(text.as_bytes(), "news.tsv", ParseMode::Strict).unwrap();
    assert_eq!(items.len(), 1500);
    for (item, line) in items.iter().zip(text.lines()) {
        let lead: Vec<&str> = line.split('\t').take(4).collect();
        assert_eq!(item.to_tsv_row(), lead.join("\t"));
    }
    assert_eq!(build_vocab(&items, NewsField::Type).len(), 8);
    assert_eq!(build_vocab(&items, NewsField::Category).len(), 48);
}

#[test]
fn store_file_round_trips() {
    let corpus = Corpus::load(
        &fixture("news.tsv"),
        &fixture("behaviors.tsv"),
        ParseMode::Strict,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.ndjson");
    store::save(&path, &corpus).unwrap();
    let back = store::load(&path).unwrap();
    assert_eq!(back, corpus);
}

#[test]
fn merged_history_only_holds_ids_the_user_read() {
    let corpus = Corpus::load(
        &fixture("news.tsv"),
        &fixture("behaviors.tsv"),
        ParseMode::Strict,
    )
    .unwrap();
    let histories = build_user_history(&corpus.behaviors, true);
    for (user, items) in &histories {
        let mut read = std::collections::BTreeSet::new();
        for r in corpus.behaviors.iter().filter(|r| &r.user_id == user) {
            read.extend(r.history.iter().cloned());
            read.extend(r.clicked().map(str::to_string));
        }
        assert!(items.iter().all(|id| read.contains(id)), "user {user}");
        let unique: std::collections::BTreeSet<_> = items.iter().collect();
        assert_eq!(unique.len(), items.len());
    }
    let stats = corpus.stats(true);
    assert_eq!(stats.users, histories.len());
    assert_eq!(stats.impressions, 1000);
}

/// Set `DNNR_MIND_DIR` to a MINDsmall_train directory to check the corpus
/// counts.
#[test]
fn mind_small_counts_when_available() {
    let Some(dir) = std::env::var_os("DNNR_MIND_DIR") else {
        eprintln!("DNNR_MIND_DIR not set; skipping");
        return;
    };
    let dir = PathBuf::from(dir);
    let corpus = Corpus::load(
        &dir.join("news.tsv"),
        &dir.join("behaviors.tsv"),
        ParseMode::Skip,
    )
    .unwrap();
    let stats = corpus.stats(true);
    assert_eq!(stats.users, 50_000);
    assert_eq!(stats.news, 51_282);
    assert_eq!(stats.types, 16);
    assert_eq!(stats.categories, 212);
}
