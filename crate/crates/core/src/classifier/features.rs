//! Hashed unigram + adjacent-bigram features, L2-normalized.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

pub const DEFAULT_DIM: usize = 1 << 18;
pub const DEFAULT_SALT: u64 = 0x5eed_1e55_0b5e_55ed;

/// Separates the halves of a bigram key; never appears inside a token.
const BIGRAM_JOIN: u8 = 0x1f;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (i, v) in entries {
            assert!((i as usize) < dim, "feature index {i} out of range for dimension {dim}");
            *map.entry(i).or_insert(0.0) += v;
        }
        Self {
            dim,
            entries: map.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHasher {
    pub dim: usize,
    pub salt: u64,
}

impl Default for FeatureHasher {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            salt: DEFAULT_SALT,
        }
    }
}

impl FeatureHasher {
    pub fn new(dim: usize, salt: u64) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        Self { dim, salt }
    }

    pub fn unigram_index(&self, token: &str) -> u32 {
        (xxh3_64_with_seed(token.as_bytes(), self.salt) % self.dim as u64) as u32
    }

    pub fn bigram_index(&self, first: &str, second: &str) -> u32 {
        let mut key = Vec::with_capacity(first.len() + second.len() + 1);
        key.extend_from_slice(first.as_bytes());
        key.push(BIGRAM_JOIN);
        key.extend_from_slice(second.as_bytes());
        (xxh3_64_with_seed(&key, self.salt) % self.dim as u64) as u32
    }

    /// Counts unigrams and adjacent bigrams into buckets, then scales to unit
    /// length. No tokens gives the zero vector.
    pub fn featurize<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureVector {
        let unigrams = tokens.iter().map(|t| (self.unigram_index(t.as_ref()), 1.0));
        let bigrams = tokens
            .windows(2)
            .map(|w| (self.bigram_index(w[0].as_ref(), w[1].as_ref()), 1.0));
        let counts = FeatureVector::from_entries(self.dim, unigrams.chain(bigrams));
        let norm = counts.norm();
        if norm == 0.0 {
            counts
        } else {
            counts.scaled(1.0 / norm)
        }
    }
}
