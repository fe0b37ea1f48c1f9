//! Seed derivation and the deterministic hash-embedding fallback.

use core::hash::Hasher;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::vector::{l2_normalize_in_place, Normalized};

/// 64-bit FNV-1a of `bytes`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Per-user seed, a pure function of the run seed and the user id, so the
/// order in which workers pick up users cannot change any result.
pub fn user_seed(run_seed: u64, user_id: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&run_seed.to_le_bytes());
    h.write(user_id.as_bytes());
    h.finish()
}

/// Lower-cased alphanumeric tokens of a title.
pub fn tokenize(title: &str) -> Vec<String> {
    title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Deterministic pseudo-embedding of a title: every token seeds its own
/// standard-Gaussian vector, the vectors are averaged and the mean is
/// L2-normalized. Titles sharing tokens land close together. A title without
/// tokens yields the zero vector with `zero` set.
///
/// `dim` must be at least 1.
pub fn hash_embed(title: &str, dim: usize, seed: u64) -> Normalized {
    assert!(dim >= 1, "hash_embed needs dim >= 1");
    let tokens = tokenize(title);
    let mut acc = vec![0f64; dim];
    for token in &tokens {
        let mut h = FnvHasher::with_key(seed);
        h.write(token.as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        for a in acc.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *a += g;
        }
    }
    let mut values: Vec<f32> = if tokens.is_empty() {
        vec![0.0; dim]
    } else {
        let n = tokens.len() as f64;
        acc.iter().map(|a| (a / n) as f32).collect()
    };
    let zero = l2_normalize_in_place(&mut values).expect("gaussian draws are finite");
    Normalized { values, zero }
}
