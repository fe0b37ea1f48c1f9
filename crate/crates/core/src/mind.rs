//! MIND-format records: catalog rows, impression logs, per-user histories and
//! categorical vocabularies.
//!
//! Column mapping follows the dataset's own naming shifted by one level: the
//! MIND `category` column is the news *type* (16 values on MIND-small) and
//! the MIND `subcategory` column is the news *category* (212 values).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};

/// Timestamp layout of the behaviors file, e.g. `11/15/2019 10:22:32 AM`.
pub const TIME_FORMAT: &str = "%m/%d/%Y %I:%M:%S %p";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsItem {
    pub news_id: String,
    pub news_type: String,
    pub news_category: String,
    pub title: String,
}

impl NewsItem {
    /// The four leading columns of a news.tsv row.
    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.news_id, self.news_type, self.news_category, self.title
        )
    }

    pub fn field(&self, field: NewsField) -> &str {
        match field {
            NewsField::Type => &self.news_type,
            NewsField::Category => &self.news_category,
        }
    }
}

/// Parses one news.tsv row. Columns past the fourth (abstract, url,
/// entities) are ignored.
pub fn parse_news_line(line: &str) -> Result<NewsItem> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut cols = line.split('\t');
    let mut next = |name: &str| {
        cols.next()
            .map(str::to_string)
            .ok_or_else(|| Error::Parse(format!("news row is missing the {name} column")))
    };
    let news_id = next("id")?;
    let news_type = next("type")?;
    let news_category = next("category")?;
    let title = next("title")?;
    if news_id.is_empty() {
        return Err(Error::Parse("empty news id".into()));
    }
    Ok(NewsItem {
        news_id,
        news_type,
        news_category,
        title,
    })
}

/// A behaviors.tsv timestamp. The original token is kept so rows serialize
/// back byte-for-byte whatever zero padding the source used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MindTime {
    raw: String,
    value: NaiveDateTime,
}

impl MindTime {
    pub fn parse(raw: &str) -> Result<Self> {
        let value = NaiveDateTime::parse_from_str(raw, TIME_FORMAT)
            .map_err(|e| Error::Parse(format!("bad timestamp `{raw}`: {e}")))?;
        Ok(MindTime {
            raw: raw.to_string(),
            value,
        })
    }

    pub fn from_datetime(value: NaiveDateTime) -> Self {
        MindTime {
            raw: value.format("%-m/%-d/%Y %-I:%M:%S %p").to_string(),
            value,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn value(&self) -> NaiveDateTime {
        self.value
    }
}

impl PartialOrd for MindTime {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MindTime {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.value
            .cmp(&other.value)
            .then_with(|| self.raw.cmp(&other.raw))
    }
}

impl fmt::Display for MindTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub news_id: String,
    pub clicked: bool,
}

impl Candidate {
    pub fn label(&self) -> u8 {
        u8::from(self.clicked)
    }
}

/// One behaviors.tsv row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpressionRecord {
    pub impression_id: u64,
    pub user_id: String,
    pub time: MindTime,
    /// Oldest first.
    pub history: Vec<String>,
    pub candidates: Vec<Candidate>,
}

impl ImpressionRecord {
    pub fn to_tsv_row(&self) -> String {
        let history = self.history.join(" ");
        let candidates: Vec<String> = self
            .candidates
            .iter()
            .map(|c| format!("{}-{}", c.news_id, c.label()))
            .collect();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.impression_id,
            self.user_id,
            self.time,
            history,
            candidates.join(" ")
        )
    }

    pub fn clicked(&self) -> impl Iterator<Item = &str> {
        self.candidates
            .iter()
            .filter(|c| c.clicked)
            .map(|c| c.news_id.as_str())
    }
}

fn parse_candidate(token: &str) -> Result<Candidate> {
    let (id, label) = token
        .rsplit_once('-')
        .ok_or_else(|| Error::Parse(format!("candidate `{token}` lacks a -0/-1 label")))?;
    let clicked = match label {
        "0" => false,
        "1" => true,
        _ => {
            return Err(Error::Parse(format!(
                "candidate `{token}` has label `{label}`"
            )))
        }
    };
    if id.is_empty() {
        return Err(Error::Parse(format!("candidate `{token}` has an empty id")));
    }
    Ok(Candidate {
        news_id: id.to_string(),
        clicked,
    })
}

fn tokens(field: &str) -> impl Iterator<Item = &str> {
    field.split(' ').filter(|t| !t.is_empty())
}

/// Parses one behaviors.tsv row: impression id, user id, time, history,
/// candidates.
pub fn parse_behavior_line(line: &str) -> Result<ImpressionRecord> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 5 {
        return Err(Error::Parse(format!(
            "expected 5 columns, found {}",
            cols.len()
        )));
    }
    let impression_id = cols[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad impression id `{}`", cols[0])))?;
    if cols[1].is_empty() {
        return Err(Error::Parse("empty user id".into()));
    }
    let time = MindTime::parse(cols[2])?;
    let history = tokens(cols[3]).map(str::to_string).collect();
    let candidates = tokens(cols[4])
        .map(parse_candidate)
        .collect::<Result<Vec<_>>>()?;
    if candidates.is_empty() {
        return Err(Error::Parse("impression has no candidates".into()));
    }
    Ok(ImpressionRecord {
        impression_id,
        user_id: cols[1].to_string(),
        time,
        history,
        candidates,
    })
}

/// Record indices grouped by user, each group in impression-time order
/// (input order among equal timestamps).
pub fn records_by_user(records: &[ImpressionRecord]) -> BTreeMap<&str, Vec<usize>> {
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_user.entry(r.user_id.as_str()).or_default().push(i);
    }
    for idx in by_user.values_mut() {
        idx.sort_by(|&a, &b| records[a].time.cmp(&records[b].time).then(a.cmp(&b)));
    }
    by_user
}

/// Deduplicating, order-preserving id list.
#[derive(Debug, Default, Clone)]
pub struct OrderedIds {
    ids: Vec<String>,
    seen: BTreeSet<String>,
}

impl OrderedIds {
    pub fn push(&mut self, id: &str) -> bool {
        if self.seen.contains(id) {
            return false;
        }
        self.seen.insert(id.to_string());
        self.ids.push(id.to_string());
        true
    }

    pub fn contains(&self, id: &str) -> bool {
        self.seen.contains(id)
    }

    pub fn into_vec(self) -> Vec<String> {
        self.ids
    }
}

/// Merges the history columns of a user's records (in time order) with, when
/// `merge_clicks` is set, the ids clicked in the given records.
pub fn merge_history<'a>(
    records: impl IntoIterator<Item = &'a ImpressionRecord>,
    merge_clicks: bool,
) -> Vec<String> {
    let records: Vec<&ImpressionRecord> = records.into_iter().collect();
    let mut out = OrderedIds::default();
    for r in &records {
        for id in &r.history {
            out.push(id);
        }
    }
    if merge_clicks {
        for r in &records {
            for id in r.clicked() {
                out.push(id);
            }
        }
    }
    out.into_vec()
}

/// Per-user positive list: history ids followed by clicked candidates in
/// impression-time order, deduplicated. Read counts are the list lengths.
pub fn build_user_history(
    records: &[ImpressionRecord],
    merge_clicks: bool,
) -> BTreeMap<String, Vec<String>> {
    records_by_user(records)
        .into_iter()
        .map(|(user, idx)| {
            let items = merge_history(idx.iter().map(|&i| &records[i]), merge_clicks);
            (user.to_string(), items)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewsField {
    Type,
    Category,
}

impl FromStr for NewsField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type" => Ok(NewsField::Type),
            "category" => Ok(NewsField::Category),
            other => Err(Error::UnknownField(other.to_string())),
        }
    }
}

/// Sorted distinct labels with a reverse lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = labels.into_iter().collect();
        let labels: Vec<String> = set.into_iter().map(str::to_string).collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Vocabulary { labels, index }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn build_vocab(catalog: &[NewsItem], field: NewsField) -> Vocabulary {
    Vocabulary::from_labels(catalog.iter().map(|n| n.field(field)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const TABLE_ROW: &str = "91\tU397059\t11/15/2019 10:22:32 AM\t\
        N106403 N71977 N97080 N102132 N97212 N121652\t\
        N129416-0 N26703-1 N120089-1 N53018-0 N89764-0 N91737-0 N29160-0";

    #[test]
    fn parses_single_news_row() {
        let n = parse_news_line("N1\tnews\tnewsus\tHello world").unwrap();
        assert_eq!(
            n,
            NewsItem {
                news_id: "N1".into(),
                news_type: "news".into(),
                news_category: "newsus".into(),
                title: "Hello world".into(),
            }
        );
    }

    #[test]
    fn news_extra_columns_ignored_and_short_rows_rejected() {
        let n = parse_news_line("N2\tsports\tnfl\tTitle\tabstract\thttp://x\t[]\t[]").unwrap();
        assert_eq!(n.title, "Title");
        assert!(matches!(
            parse_news_line("N3\tsports\tnfl"),
            Err(Error::Parse(_))
        ));
        // An empty title is fine.
        assert_eq!(parse_news_line("N4\ta\tb\t").unwrap().title, "");
    }

    #[test]
    fn parses_example_behavior_row() {
        let r = parse_behavior_line(TABLE_ROW).unwrap();
        assert_eq!(r.impression_id, 91);
        assert_eq!(r.user_id, "U397059");
        assert_eq!(
            r.time.value(),
            NaiveDateTime::parse_from_str("2019-11-15 10:22:32", "%Y-%m-%d %H:%M:%S").unwrap()
        );
        assert_eq!(r.history.len(), 6);
        let labels: Vec<u8> = r.candidates.iter().map(Candidate::label).collect();
        assert_eq!(labels, vec![0, 1, 1, 0, 0, 0, 0]);
        assert_eq!(r.to_tsv_row(), TABLE_ROW);
    }

    #[test]
    fn pm_times_and_empty_history() {
        let r = parse_behavior_line("7\tU1\t11/9/2019 1:05:00 PM\t\tN1-1").unwrap();
        assert!(r.history.is_empty());
        assert_eq!(r.time.value().format("%H").to_string(), "13");
        assert_eq!(r.to_tsv_row(), "7\tU1\t11/9/2019 1:05:00 PM\t\tN1-1");
    }

    #[test]
    fn behavior_errors() {
        let bad_label = "1\tU1\t11/15/2019 10:22:32 AM\tN1\tN2-2";
        assert!(matches!(
            parse_behavior_line(bad_label),
            Err(Error::Parse(_))
        ));
        let no_suffix = "1\tU1\t11/15/2019 10:22:32 AM\tN1\tN2";
        assert!(matches!(
            parse_behavior_line(no_suffix),
            Err(Error::Parse(_))
        ));
        let bad_time = "1\tU1\t2019-11-15 10:22\tN1\tN2-1";
        assert!(matches!(
            parse_behavior_line(bad_time),
            Err(Error::Parse(_))
        ));
        let no_candidates = "1\tU1\t11/15/2019 10:22:32 AM\tN1\t";
        assert!(matches!(
            parse_behavior_line(no_candidates),
            Err(Error::Parse(_))
        ));
        assert!(parse_behavior_line("1\tU1").is_err());
    }

    fn record(
        id: u64,
        user: &str,
        time: &str,
        history: &[&str],
        cands: &[(&str, bool)],
    ) -> ImpressionRecord {
        ImpressionRecord {
            impression_id: id,
            user_id: user.into(),
            time: MindTime::parse(time).unwrap(),
            history: history.iter().map(|s| s.to_string()).collect(),
            candidates: cands
                .iter()
                .map(|(n, c)| Candidate {
                    news_id: n.to_string(),
                    clicked: *c,
                })
                .collect(),
        }
    }

    #[test]
    fn history_concatenates_later_clicks() {
        let recs = vec![
            record(
                2,
                "U1",
                "11/15/2019 10:00:00 AM",
                &["A", "B"],
                &[("C", true), ("D", false)],
            ),
            record(
                1,
                "U1",
                "11/14/2019 10:00:00 AM",
                &["A", "B"],
                &[("E", true)],
            ),
            record(3, "U2", "11/14/2019 10:00:00 AM", &[], &[("A", false)]),
        ];
        let h = build_user_history(&recs, true);
        assert_eq!(h["U1"], vec!["A", "B", "E", "C"]);
        assert!(h["U2"].is_empty());
        let h = build_user_history(&recs, false);
        assert_eq!(h["U1"], vec!["A", "B"]);
    }

    #[test]
    fn history_dedups_clicks_already_read() {
        let recs = vec![record(
            1,
            "U1",
            "11/15/2019 10:00:00 AM",
            &["A", "B"],
            &[("A", true), ("C", true)],
        )];
        assert_eq!(build_user_history(&recs, true)["U1"], vec!["A", "B", "C"]);
    }

    #[test]
    fn vocab_is_sorted_and_dense() {
        let cat = vec![
            parse_news_line("N1\tsports\tnfl\tx").unwrap(),
            parse_news_line("N2\tnews\tnewsus\ty").unwrap(),
            parse_news_line("N3\tsports\tnba\tz").unwrap(),
        ];
        let v = build_vocab(&cat, NewsField::Type);
        assert_eq!(v.labels(), ["news", "sports"]);
        assert_eq!(v.index_of("sports"), Some(1));
        assert_eq!(build_vocab(&cat, NewsField::Category).len(), 3);
        assert_eq!(
            build_vocab(&cat[..1], "type".parse().unwrap()).index_of("sports"),
            Some(0)
        );
        assert!(matches!(
            "title".parse::<NewsField>(),
            Err(Error::UnknownField(_))
        ));
    }
}
