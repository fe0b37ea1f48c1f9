//! Algorithmic core of a decentralized, content-based news recommender.
//!
//! Every user owns a small feed-forward network trained on a balanced pool of
//! their own reads plus synthetic negatives: the catalog items whose title
//! embeddings have the smallest inner product with the user's centroid. This
//! crate holds everything that does not touch the filesystem:
//!
//! * [`mind`]: MIND-format record types, row parsers and user histories.
//! * [`vector`] and [`hashing`]: vector helpers and the hash-embedding fallback.
//! * [`features`]: the embedding store and fixed-layout feature vectors.
//! * [`sampler`]: the inner-product index and the three pool builders.
//! * [`network`]: the per-user network, backprop and training.
//! * [`metrics`]: AUC and descriptive statistics.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod features;
pub mod hashing;
pub mod metrics;
pub mod mind;
pub mod network;
pub mod sampler;
pub mod vector;

pub use error::{Error, Result};
pub use features::{EmbeddingStore, FeatureEncoder, FeatureSet};
pub use mind::{ImpressionRecord, NewsField, NewsItem, Vocabulary};
pub use network::{NetworkConfig, OptimizerKind, UserModel};
pub use sampler::{InnerProductIndex, PoolEntry, SamplerKind, SyntheticPool};
