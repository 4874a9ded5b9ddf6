//! Fixed-length three-tensor encoding: word ids, attention mask and
//! segment (type) ids.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::tokenize::TokenSequence;

pub const DEFAULT_SEQUENCE_LENGTH: usize = 128;
pub const PAD_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub input_word_ids: Vec<u32>,
    pub input_mask: Vec<u8>,
    pub input_type_ids: Vec<u32>,
}

/// Maps tokens to integer ids. Id 0 is reserved for padding.
pub trait Vocabulary {
    fn token_id(&self, token: &str) -> u32;
}

/// Hash-based ids in `1..size`, stable across runs for a given salt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedVocabulary {
    pub size: u32,
    pub salt: u64,
}

impl Default for HashedVocabulary {
    fn default() -> Self {
        Self {
            size: 30_522,
            salt: super::features::DEFAULT_SALT,
        }
    }
}

impl Vocabulary for HashedVocabulary {
    fn token_id(&self, token: &str) -> u32 {
        let buckets = u64::from(self.size.max(2) - 1);
        1 + (xxh3_64_with_seed(token.as_bytes(), self.salt) % buckets) as u32
    }
}

/// A vocabulary file served alongside a remote model: one token per line,
/// the line number being the id.
#[derive(Debug, Clone, Default)]
pub struct ServedVocabulary {
    ids: HashMap<String, u32>,
    unknown_id: u32,
}

impl ServedVocabulary {
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>, unknown_token: &str) -> Self {
        let ids: HashMap<String, u32> = lines
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.trim_end().to_string(), i as u32))
            .collect();
        let unknown_id = ids.get(unknown_token).copied().unwrap_or(PAD_ID);
        Self { ids, unknown_id }
    }

    pub fn load(path: &Path, unknown_token: &str) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_lines(text.lines(), unknown_token))
    }
}

impl Vocabulary for ServedVocabulary {
    fn token_id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(self.unknown_id)
    }
}

/// Truncates or pads `tokens` to `len`. Single segment, so type ids are all 0.
pub fn encode(tokens: &TokenSequence, len: usize, vocab: &impl Vocabulary) -> EncodedInput {
    assert!(len > 0, "sequence length must be positive");
    let mut input_word_ids: Vec<u32> = tokens.iter().take(len).map(|t| vocab.token_id(t)).collect();
    let real = input_word_ids.len();
    input_word_ids.resize(len, PAD_ID);
    let mut input_mask = vec![1u8; real];
    input_mask.resize(len, 0);
    EncodedInput {
        input_word_ids,
        input_mask,
        input_type_ids: vec![0; len],
    }
}
