//! Title-embedding store and fixed-layout feature vectors.
//!
//! Layout is always `embedding | type one-hot | category one-hot`, with the
//! slices excluded by the [`FeatureSet`] left out. The network routes the
//! leading embedding slice through its bottleneck, so the order is fixed.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::hashing::hash_embed;
use crate::mind::{NewsItem, Vocabulary};
use crate::vector::l2_normalize_in_place;

/// Embedding dimension of the sentence encoder the pipeline is built around.
pub const DEFAULT_EMBED_DIM: usize = 384;

/// News id → `dim`-long `f32` vector, held fully in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: BTreeMap<String, usize>,
    normalized: bool,
    zero_rows: usize,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            index: BTreeMap::new(),
            normalized: false,
            zero_rows: 0,
        }
    }

    /// Hash embeddings for every title in `catalog`.
    pub fn from_titles(catalog: &[NewsItem], dim: usize, seed: u64) -> Self {
        let mut store = EmbeddingStore::new(dim);
        for item in catalog {
            let e = hash_embed(&item.title, dim, seed);
            store.insert(&item.news_id, &e.values).expect("dims agree");
        }
        store
    }

    /// Adds or replaces the vector for `id`.
    pub fn insert(&mut self, id: &str, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        match self.index.get(id) {
            Some(&row) => self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(id.to_string(), self.ids.len());
                self.ids.push(id.to_string());
                self.data.extend_from_slice(vector);
            }
        }
        self.normalized = false;
        Ok(())
    }

    /// L2-normalizes every vector in place and returns how many were all
    /// zeros (those stay zero).
    pub fn normalize(&mut self) -> Result<usize> {
        let mut zeros = 0;
        if self.dim > 0 {
            for row in self.data.chunks_exact_mut(self.dim) {
                if l2_normalize_in_place(row)? {
                    zeros += 1;
                }
            }
        }
        self.normalized = true;
        self.zero_rows = zeros;
        Ok(zeros)
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&row| self.row(row))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Records in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), self.row(i)))
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

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Zero vectors seen by the last [`normalize`](Self::normalize).
    pub fn zero_rows(&self) -> usize {
        self.zero_rows
    }
}

/// Input-variable combinations of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureSet {
    /// Title embedding only.
    Emb,
    /// Type and category one-hots, no embedding.
    TC,
    EmbC,
    EmbT,
    EmbTC,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::Emb,
        FeatureSet::TC,
        FeatureSet::EmbC,
        FeatureSet::EmbT,
        FeatureSet::EmbTC,
    ];

    pub fn has_embedding(self) -> bool {
        !matches!(self, FeatureSet::TC)
    }

    pub fn has_type(self) -> bool {
        matches!(self, FeatureSet::TC | FeatureSet::EmbT | FeatureSet::EmbTC)
    }

    pub fn has_category(self) -> bool {
        matches!(self, FeatureSet::TC | FeatureSet::EmbC | FeatureSet::EmbTC)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Emb => "Emb",
            FeatureSet::TC => "TC",
            FeatureSet::EmbC => "EmbC",
            FeatureSet::EmbT => "EmbT",
            FeatureSet::EmbTC => "EmbTC",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "emb" => Ok(FeatureSet::Emb),
            "tc" => Ok(FeatureSet::TC),
            "embc" => Ok(FeatureSet::EmbC),
            "embt" => Ok(FeatureSet::EmbT),
            "embtc" => Ok(FeatureSet::EmbTC),
            _ => Err(Error::UnknownFeatureSet(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    /// A type or category label was missing from its vocabulary and its
    /// one-hot slice was left all zero.
    pub unknown_label: bool,
}

/// Builds feature vectors from an embedding store and the two vocabularies.
#[derive(Debug, Clone, Copy)]
pub struct FeatureEncoder<'a> {
    store: &'a EmbeddingStore,
    types: &'a Vocabulary,
    categories: &'a Vocabulary,
    set: FeatureSet,
}

impl<'a> FeatureEncoder<'a> {
    pub fn new(
        store: &'a EmbeddingStore,
        types: &'a Vocabulary,
        categories: &'a Vocabulary,
        set: FeatureSet,
    ) -> Self {
        FeatureEncoder {
            store,
            types,
            categories,
            set,
        }
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.set
    }

    /// Length of the leading embedding slice (0 without `Emb`).
    pub fn embed_dim(&self) -> usize {
        if self.set.has_embedding() {
            self.store.dim()
        } else {
            0
        }
    }

    pub fn dim(&self) -> usize {
        let mut d = self.embed_dim();
        if self.set.has_type() {
            d += self.types.len();
        }
        if self.set.has_category() {
            d += self.categories.len();
        }
        d
    }

    pub fn encode(&self, item: &NewsItem) -> Result<FeatureVector> {
        let mut values = Vec::with_capacity(self.dim());
        let mut unknown_label = false;
        if self.set.has_embedding() {
            let e = self
                .store
                .get(&item.news_id)
                .ok_or_else(|| Error::MissingEmbedding(item.news_id.clone()))?;
            values.extend_from_slice(e);
        }
        let mut one_hot = |vocab: &Vocabulary, label: &str| {
            let start = values.len();
            values.resize(start + vocab.len(), 0.0);
            match vocab.index_of(label) {
                Some(i) => values[start + i] = 1.0,
                None => {
                    log::warn!("news {}: label `{label}` not in vocabulary", item.news_id);
                    unknown_label = true;
                }
            }
        };
        if self.set.has_type() {
            one_hot(self.types, &item.news_type);
        }
        if self.set.has_category() {
            one_hot(self.categories, &item.news_category);
        }
        Ok(FeatureVector {
            values,
            unknown_label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mind::parse_news_line;
    use alloc::vec;

    fn item(id: &str, t: &str, c: &str) -> NewsItem {
        NewsItem {
            news_id: id.into(),
            news_type: t.into(),
            news_category: c.into(),
            title: "t".into(),
        }
    }

    #[test]
    fn categorical_only_layout() {
        let types = Vocabulary::from_labels(["a", "b", "c"]);
        let cats = Vocabulary::from_labels(["x", "y"]);
        let store = EmbeddingStore::new(4);
        let enc = FeatureEncoder::new(&store, &types, &cats, FeatureSet::TC);
        let f = enc.encode(&item("N1", "a", "y")).unwrap();
        assert_eq!(f.values, vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(!f.unknown_label);
        assert_eq!(enc.dim(), 5);
        assert_eq!(enc.embed_dim(), 0);
    }

    #[test]
    fn full_layout_puts_embedding_first() {
        let types = Vocabulary::from_labels(["a", "b"]);
        let cats = Vocabulary::from_labels(["x", "y", "z"]);
        let mut store = EmbeddingStore::new(2);
        store.insert("N1", &[0.5, -0.5]).unwrap();
        let sizes: Vec<usize> = FeatureSet::ALL
            .iter()
            .map(|&s| FeatureEncoder::new(&store, &types, &cats, s).dim())
            .collect();
        assert_eq!(sizes, vec![2, 5, 5, 4, 7]);
        let enc = FeatureEncoder::new(&store, &types, &cats, FeatureSet::EmbTC);
        let f = enc.encode(&item("N1", "b", "z")).unwrap();
        assert_eq!(f.values, vec![0.5, -0.5, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn unknown_label_is_all_zero_and_missing_embedding_errors() {
        let types = Vocabulary::from_labels(["a"]);
        let cats = Vocabulary::from_labels(["x"]);
        let mut store = EmbeddingStore::new(1);
        store.insert("N1", &[1.0]).unwrap();
        let enc = FeatureEncoder::new(&store, &types, &cats, FeatureSet::EmbTC);
        let f = enc.encode(&item("N1", "zzz", "x")).unwrap();
        assert_eq!(f.values, vec![1.0, 0.0, 1.0]);
        assert!(f.unknown_label);
        assert_eq!(
            enc.encode(&item("N9", "a", "x")),
            Err(Error::MissingEmbedding("N9".into()))
        );
    }

    #[test]
    fn store_rejects_wrong_dim_and_normalizes() {
        let mut store = EmbeddingStore::new(2);
        assert!(store.insert("A", &[1.0]).is_err());
        store.insert("A", &[3.0, 4.0]).unwrap();
        store.insert("B", &[0.0, 0.0]).unwrap();
        assert_eq!(store.normalize().unwrap(), 1);
        assert!(store.is_normalized());
        assert_eq!(store.get("A").unwrap(), &[0.6, 0.8]);
        assert_eq!(store.get("B").unwrap(), &[0.0, 0.0]);
        store.insert("A", &[1.0, 0.0]).unwrap();
        assert_eq!(store.len(), 2);
        assert!(!store.is_normalized());
    }

    #[test]
    fn feature_set_names_round_trip() {
        for s in FeatureSet::ALL {
            assert_eq!(s.name().parse::<FeatureSet>().unwrap(), s);
        }
        assert_eq!("T&C".parse::<FeatureSet>().unwrap(), FeatureSet::TC);
        assert_eq!("Emb&T&C".parse::<FeatureSet>().unwrap(), FeatureSet::EmbTC);
        assert!("title".parse::<FeatureSet>().is_err());
    }

    #[test]
    fn hash_store_covers_catalog() {
        let cat = vec![
            parse_news_line("N1\ta\tx\tHello").unwrap(),
            parse_news_line("N2\ta\tx\t").unwrap(),
        ];
        let mut store = EmbeddingStore::from_titles(&cat, 8, 1);
        assert_eq!(store.len(), 2);
        assert_eq!(store.normalize().unwrap(), 1);
    }
}
