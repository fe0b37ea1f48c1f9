//! Training-pool construction.
//!
//! Three ways to pair a user's reads with negatives:
//!
//! * [`synthetic_pool`]: the catalog items with the smallest inner product
//!   to the mean of the user's normalized read embeddings. On the unit sphere
//!   `‖x − y‖² = 2 − 2⟨x, y⟩`, so these are the farthest items in L2.
//! * [`random_pool`]: unread items drawn uniformly without replacement.
//! * [`impressions_pool`]: the user's own impressions, non-clicks as negatives.
//!
//! Synthetic and random pools are balanced: one negative per positive, with
//! positives capped at the `max_samples` most recent reads.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::EmbeddingStore;
use crate::mind::{ImpressionRecord, OrderedIds};
use crate::vector::{dot, l2_normalize_in_place, norm};

/// Positive cap per user.
pub const DEFAULT_MAX_SAMPLES: usize = 60;

/// Centroids shorter than this are treated as zero.
const ZERO_CENTROID: f64 = 1e-9;

/// Row-major matrix of unit-norm title embeddings in ascending id order.
/// Zero vectors are left out, so they are never candidates.
#[derive(Debug, Clone)]
pub struct InnerProductIndex {
    dim: usize,
    ids: Vec<String>,
    rows: Vec<f32>,
    lookup: BTreeMap<String, usize>,
}

impl InnerProductIndex {
    /// Indexes normalized copies of every non-zero vector in `store`.
    pub fn build(store: &EmbeddingStore) -> Result<Self> {
        Self::from_rows(store.dim(), store.iter())
    }

    pub fn from_rows<'a>(
        dim: usize,
        rows: impl IntoIterator<Item = (&'a str, &'a [f32])>,
    ) -> Result<Self> {
        let mut sorted: BTreeMap<&str, Vec<f32>> = BTreeMap::new();
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let mut v = v.to_vec();
            if !l2_normalize_in_place(&mut v)? {
                sorted.insert(id, v);
            } else {
                sorted.remove(id);
            }
        }
        let mut ids = Vec::with_capacity(sorted.len());
        let mut data = Vec::with_capacity(sorted.len() * dim);
        for (id, v) in sorted {
            ids.push(id.to_string());
            data.extend_from_slice(&v);
        }
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(InnerProductIndex {
            dim,
            ids,
            rows: data,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn check_dim(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Row mask with `true` at every row whose id is in `ids`.
    pub fn mask<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for id in ids {
            if let Some(i) = self.position(id) {
                mask[i] = true;
            }
        }
        mask
    }

    /// `⟨query, row⟩` for every row.
    pub fn scores(&self, query: &[f32]) -> Result<Vec<f64>> {
        self.check_dim(query)?;
        Ok(if self.dim == 0 {
            vec![0.0; self.len()]
        } else {
            self.rows
                .chunks_exact(self.dim)
                .map(|r| dot(query, r))
                .collect()
        })
    }

    fn order<'s>(&'s self, scores: &'s [f64]) -> impl Fn(&usize, &usize) -> Ordering + 's {
        move |&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then_with(|| self.ids[a].cmp(&self.ids[b]))
        }
    }

    /// Every non-excluded id, ascending by inner product with `centroid`
    /// (farthest first), ties broken by ascending id.
    pub fn rank_by_inner_product<'a>(
        &self,
        centroid: &[f32],
        exclude: impl IntoIterator<Item = &'a str>,
    ) -> Result<Vec<&str>> {
        let scores = self.scores(centroid)?;
        let mask = self.mask(exclude);
        let mut rows: Vec<usize> = (0..self.len()).filter(|&i| !mask[i]).collect();
        rows.sort_unstable_by(self.order(&scores));
        Ok(rows.into_iter().map(|i| self.ids[i].as_str()).collect())
    }

    /// The first `k` rows of the ranking above, without sorting the tail.
    pub fn farthest(&self, centroid: &[f32], k: usize, excluded: &[bool]) -> Result<Vec<usize>> {
        let scores = self.scores(centroid)?;
        let mut rows: Vec<usize> = (0..self.len()).filter(|&i| !excluded[i]).collect();
        let cmp = self.order(&scores);
        if k < rows.len() {
            if k > 0 {
                rows.select_nth_unstable_by(k - 1, &cmp);
            }
            rows.truncate(k);
        }
        rows.sort_unstable_by(cmp);
        Ok(rows)
    }
}

/// Mean of the index rows of `history` ids. Ids missing from the index are
/// skipped; no resolvable id is an [`Error::EmptyHistory`].
pub fn user_centroid(
    user_id: &str,
    history: &[String],
    index: &InnerProductIndex,
) -> Result<Vec<f32>> {
    let mut acc = vec![0f64; index.dim()];
    let mut n = 0usize;
    for row in history.iter().filter_map(|id| index.position(id)) {
        for (a, &x) in acc.iter_mut().zip(index.row(row)) {
            *a += f64::from(x);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyHistory(user_id.to_string()));
    }
    Ok(acc.into_iter().map(|a| (a / n as f64) as f32).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Synthetic,
    Random,
    Impressions,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [
        SamplerKind::Synthetic,
        SamplerKind::Random,
        SamplerKind::Impressions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Synthetic => "synthetic",
            SamplerKind::Random => "random",
            SamplerKind::Impressions => "impressions",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Precondition(alloc::format!("unknown sampler `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    pub news_id: String,
    /// 1 = read, 0 = negative.
    pub label: u8,
}

/// Conditions worth a warning that did not stop pool construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolNote {
    /// The centroid was zero, so negatives were drawn at random instead.
    RandomFallback,
    /// Fewer eligible negatives than positives.
    ShortOfNegatives { wanted: usize, got: usize },
}

/// A user's labelled training set. Positives come first, oldest to newest,
/// followed by the negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPool {
    pub user_id: String,
    pub kind: SamplerKind,
    pub entries: Vec<PoolEntry>,
    pub notes: Vec<PoolNote>,
}

impl SyntheticPool {
    fn assemble(user_id: &str, kind: SamplerKind, positives: &[&str], negatives: &[&str]) -> Self {
        let label = |label| {
            move |id: &&str| PoolEntry {
                news_id: id.to_string(),
                label,
            }
        };
        let entries = positives
            .iter()
            .map(label(1))
            .chain(negatives.iter().map(label(0)))
            .collect();
        SyntheticPool {
            user_id: user_id.to_string(),
            kind,
            entries,
            notes: Vec::new(),
        }
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|e| e.label == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.entries.iter().filter(|e| e.label == 0).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn note_balance(&mut self, wanted: usize) {
        let got = self.negatives();
        if got < wanted {
            log::warn!(
                "user {}: only {got} of {wanted} negatives available",
                self.user_id
            );
            self.notes.push(PoolNote::ShortOfNegatives { wanted, got });
        }
    }
}

/// The `max_samples` most recent history ids present in the index.
pub fn recent_positives<'h>(
    history: &'h [String],
    index: &InnerProductIndex,
    max_samples: usize,
) -> Vec<&'h str> {
    let resolvable: Vec<&str> = history
        .iter()
        .map(String::as_str)
        .filter(|id| index.position(id).is_some())
        .collect();
    let skip = resolvable.len().saturating_sub(max_samples);
    resolvable[skip..].to_vec()
}

/// Balanced pool whose negatives are the items farthest from the user's
/// centroid, excluding everything in `history`.
///
/// `history` is chronological. A zero centroid falls back to
/// [`random_pool`] with `fallback_seed`.
pub fn synthetic_pool(
    user_id: &str,
    history: &[String],
    index: &InnerProductIndex,
    max_samples: usize,
    fallback_seed: u64,
) -> Result<SyntheticPool> {
    synthetic_pool_excluding(user_id, history, &[], index, max_samples, fallback_seed)
}

/// [`synthetic_pool`] that also keeps `also_excluded` out of the negatives.
pub fn synthetic_pool_excluding(
    user_id: &str,
    history: &[String],
    also_excluded: &[String],
    index: &InnerProductIndex,
    max_samples: usize,
    fallback_seed: u64,
) -> Result<SyntheticPool> {
    let positives = recent_positives(history, index, max_samples);
    if positives.is_empty() {
        return Err(Error::EmptyHistory(user_id.to_string()));
    }
    let owned: Vec<String> = positives.iter().map(|s| s.to_string()).collect();
    let centroid = user_centroid(user_id, &owned, index)?;
    if norm(&centroid) < ZERO_CENTROID {
        log::warn!("user {user_id}: zero centroid, falling back to random negatives");
        let mut pool = random_pool_excluding(
            user_id,
            history,
            also_excluded,
            index,
            fallback_seed,
            max_samples,
        )?;
        pool.kind = SamplerKind::Synthetic;
        pool.notes.insert(0, PoolNote::RandomFallback);
        return Ok(pool);
    }
    let excluded = index.mask(history.iter().chain(also_excluded).map(String::as_str));
    let rows = index.farthest(&centroid, positives.len(), &excluded)?;
    let negatives: Vec<&str> = rows.iter().map(|&i| index.ids()[i].as_str()).collect();
    let mut pool = SyntheticPool::assemble(user_id, SamplerKind::Synthetic, &positives, &negatives);
    pool.note_balance(positives.len());
    Ok(pool)
}

/// Balanced pool with negatives drawn uniformly without replacement from the
/// indexed items not in `history`.
pub fn random_pool(
    user_id: &str,
    history: &[String],
    index: &InnerProductIndex,
    seed: u64,
    max_samples: usize,
) -> Result<SyntheticPool> {
    random_pool_excluding(user_id, history, &[], index, seed, max_samples)
}

/// [`random_pool`] that also keeps `also_excluded` out of the negatives.
pub fn random_pool_excluding(
    user_id: &str,
    history: &[String],
    also_excluded: &[String],
    index: &InnerProductIndex,
    seed: u64,
    max_samples: usize,
) -> Result<SyntheticPool> {
    let positives = recent_positives(history, index, max_samples);
    if positives.is_empty() {
        return Err(Error::EmptyHistory(user_id.to_string()));
    }
    let excluded = index.mask(history.iter().chain(also_excluded).map(String::as_str));
    let unread: Vec<&str> = index
        .ids()
        .iter()
        .zip(&excluded)
        .filter(|(_, &x)| !x)
        .map(|(id, _)| id.as_str())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = positives.len().min(unread.len());
    let negatives: Vec<&str> = rand::seq::index::sample(&mut rng, unread.len(), take)
        .into_iter()
        .map(|i| unread[i])
        .collect();
    let mut pool = SyntheticPool::assemble(user_id, SamplerKind::Random, &positives, &negatives);
    pool.note_balance(positives.len());
    Ok(pool)
}

/// Keeps the last occurrence of each id, preserving chronological order.
fn dedup_keep_last<'a>(ids: impl DoubleEndedIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = OrderedIds::default();
    let mut out: Vec<&str> = ids.rev().filter(|id| seen.push(id)).collect();
    out.reverse();
    out
}

/// Pool built from the user's impressions: clicked candidates are positives,
/// shown-but-not-clicked ones negatives. `records` must be the user's
/// impressions in time order. Each side keeps its `max_samples` most recent
/// ids. Candidates clicked anywhere in `records`, or present in `history`,
/// never count as negatives.
pub fn impressions_pool(
    user_id: &str,
    records: &[&ImpressionRecord],
    history: &[String],
    max_samples: usize,
) -> Result<SyntheticPool> {
    if records.is_empty() {
        return Err(Error::EmptyHistory(user_id.to_string()));
    }
    let shown: Vec<(&str, bool)> = records
        .iter()
        .flat_map(|r| r.candidates.iter().map(|c| (c.news_id.as_str(), c.clicked)))
        .collect();
    let clicked = dedup_keep_last(shown.iter().filter(|(_, c)| *c).map(|(id, _)| *id));
    let mut blocked = OrderedIds::default();
    for id in clicked
        .iter()
        .copied()
        .chain(history.iter().map(String::as_str))
    {
        blocked.push(id);
    }
    let skipped = dedup_keep_last(
        shown
            .iter()
            .filter(|(id, c)| !*c && !blocked.contains(id))
            .map(|(id, _)| *id),
    );
    let tail = |v: &[&'_ str]| v.len().saturating_sub(max_samples);
    let positives = &clicked[tail(&clicked)..];
    let negatives = &skipped[tail(&skipped)..];
    let mut pool = SyntheticPool::assemble(user_id, SamplerKind::Impressions, positives, negatives);
    if negatives.is_empty() {
        log::warn!("user {user_id}: impressions hold no negatives");
        pool.notes.push(PoolNote::ShortOfNegatives {
            wanted: positives.len(),
            got: 0,
        });
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mind::parse_behavior_line;

    fn axes_index() -> InnerProductIndex {
        let rows: [(&str, &[f32]); 4] = [
            ("A", &[1.0, 0.0]),
            ("B", &[0.0, 1.0]),
            ("C", &[-1.0, 0.0]),
            ("D", &[0.0, -1.0]),
        ];
        InnerProductIndex::from_rows(2, rows).unwrap()
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ranks_by_hand_inner_products() {
        let rows: [(&str, &[f32]); 3] =
            [("A", &[1.0, 0.0]), ("B", &[0.0, 1.0]), ("C", &[-1.0, 0.0])];
        let index = InnerProductIndex::from_rows(2, rows).unwrap();
        assert_eq!(
            index.rank_by_inner_product(&[1.0, 0.0], []).unwrap(),
            ["C", "B", "A"]
        );
        assert_eq!(
            index.rank_by_inner_product(&[1.0, 0.0], ["C"]).unwrap(),
            ["B", "A"]
        );
        assert!(matches!(
            index.rank_by_inner_product(&[1.0], []),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_break_by_id() {
        let index = axes_index();
        assert_eq!(
            index.rank_by_inner_product(&[1.0, 0.0], []).unwrap(),
            ["C", "B", "D", "A"]
        );
    }

    #[test]
    fn zero_rows_are_not_indexed() {
        let rows: [(&str, &[f32]); 2] = [("A", &[3.0, 4.0]), ("Z", &[0.0, 0.0])];
        let index = InnerProductIndex::from_rows(2, rows).unwrap();
        assert_eq!(index.ids(), ["A"]);
        assert_eq!(index.row(0), &[0.6, 0.8]);
    }

    #[test]
    fn centroid_of_one_and_of_antipodes() {
        let index = axes_index();
        assert_eq!(
            user_centroid("u", &ids(&["B"]), &index).unwrap(),
            [0.0, 1.0]
        );
        assert_eq!(
            user_centroid("u", &ids(&["A", "C"]), &index).unwrap(),
            [0.0, 0.0]
        );
        assert_eq!(
            user_centroid("u", &ids(&["nope"]), &index),
            Err(Error::EmptyHistory("u".into()))
        );
    }

    #[test]
    fn single_read_gets_the_opposite_axis() {
        let pool = synthetic_pool("u", &ids(&["B"]), &axes_index(), 60, 0).unwrap();
        assert_eq!(
            pool.entries,
            [
                PoolEntry {
                    news_id: "B".into(),
                    label: 1
                },
                PoolEntry {
                    news_id: "D".into(),
                    label: 0
                }
            ]
        );
        assert!(pool.notes.is_empty());
    }

    #[test]
    fn antipodal_history_falls_back_to_random() {
        let pool = synthetic_pool("u", &ids(&["A", "C"]), &axes_index(), 60, 3).unwrap();
        assert_eq!(pool.notes[0], PoolNote::RandomFallback);
        assert_eq!(pool.kind, SamplerKind::Synthetic);
        assert_eq!(pool.positives(), 2);
        assert_eq!(pool.negatives(), 2);
        let negs: Vec<&str> = pool.entries[2..]
            .iter()
            .map(|e| e.news_id.as_str())
            .collect();
        assert!(negs.iter().all(|n| *n == "B" || *n == "D"));
    }

    #[test]
    fn empty_history_is_an_error() {
        assert!(matches!(
            synthetic_pool("u", &[], &axes_index(), 60, 0),
            Err(Error::EmptyHistory(_))
        ));
        assert!(matches!(
            random_pool("u", &[], &axes_index(), 0, 60),
            Err(Error::EmptyHistory(_))
        ));
    }

    #[test]
    fn random_pool_degenerate_catalog() {
        let all = ids(&["A", "B", "C", "D"]);
        let pool = random_pool("u", &all, &axes_index(), 1, 60).unwrap();
        assert_eq!(pool.negatives(), 0);
        assert_eq!(
            pool.notes,
            [PoolNote::ShortOfNegatives { wanted: 4, got: 0 }]
        );
    }

    #[test]
    fn random_pool_is_seeded() {
        let h = ids(&["A"]);
        let a = random_pool("u", &h, &axes_index(), 9, 60).unwrap();
        assert_eq!(a, random_pool("u", &h, &axes_index(), 9, 60).unwrap());
        assert_ne!(a.entries[1].news_id, "A");
    }

    #[test]
    fn impressions_pool_from_example_row() {
        let row = parse_behavior_line(
            "91\tU397059\t11/15/2019 10:22:32 AM\tN106403 N71977 N97080 N102132 N97212 N121652\t\
             N129416-0 N26703-1 N120089-1 N53018-0 N89764-0 N91737-0 N29160-0",
        )
        .unwrap();
        let pool = impressions_pool("U397059", &[&row], &row.history, 60).unwrap();
        let pos: Vec<&str> = pool
            .entries
            .iter()
            .filter(|e| e.label == 1)
            .map(|e| e.news_id.as_str())
            .collect();
        assert_eq!(pos, ["N26703", "N120089"]);
        assert_eq!(pool.negatives(), 5);
    }

    #[test]
    fn impressions_pool_clicks_only() {
        let row = parse_behavior_line("1\tU1\t11/15/2019 10:22:32 AM\t\tN1-1 N2-1").unwrap();
        let pool = impressions_pool("U1", &[&row], &[], 60).unwrap();
        assert_eq!(pool.negatives(), 0);
        assert_eq!(
            pool.notes,
            [PoolNote::ShortOfNegatives { wanted: 2, got: 0 }]
        );
        assert!(impressions_pool("U1", &[], &[], 60).is_err());
    }

    #[test]
    fn impressions_pool_never_labels_an_id_both_ways() {
        let a = parse_behavior_line("1\tU1\t11/14/2019 10:00:00 AM\tH1\tN1-0 N2-0 H1-0").unwrap();
        let b = parse_behavior_line("2\tU1\t11/15/2019 10:00:00 AM\tH1\tN1-1 N3-0").unwrap();
        let pool = impressions_pool("U1", &[&a, &b], &a.history, 60).unwrap();
        let neg: Vec<&str> = pool
            .entries
            .iter()
            .filter(|e| e.label == 0)
            .map(|e| e.news_id.as_str())
            .collect();
        assert_eq!(neg, ["N2", "N3"]);
        assert_eq!(pool.positives(), 1);
    }

    #[test]
    fn sampler_names() {
        for k in SamplerKind::ALL {
            assert_eq!(k.name().parse::<SamplerKind>().unwrap(), k);
        }
        assert!("hard".parse::<SamplerKind>().is_err());
    }

    #[test]
    fn extra_exclusions_only_affect_negatives() {
        let index = axes_index();
        let history = ids(&["A"]);
        let plain = synthetic_pool("u", &history, &index, 60, 0).unwrap();
        assert_eq!(plain.entries[1].news_id, "C");
        let pool = synthetic_pool_excluding("u", &history, &ids(&["C"]), &index, 60, 0).unwrap();
        assert_eq!(pool.entries[0].news_id, "A");
        assert_eq!(pool.entries[1].news_id, "B");
        let rnd = random_pool_excluding("u", &history, &ids(&["B", "C"]), &index, 3, 60).unwrap();
        assert_eq!(rnd.entries[1].news_id, "D");
    }
}
