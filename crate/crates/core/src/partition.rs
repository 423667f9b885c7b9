//! Green/red vocabulary splits seeded by the previous token.
//!
//! The seed for a step is `mix64(prev_id ^ key)` (see [`crate::rng::mix64`]).
//! The split is a Fisher–Yates shuffle of `0..|V|` driven by
//! `SplitMix64::new(seed)`: for `i` from `|V|-1` down to `1`, swap `i` with
//! `below(i + 1)`. The first `floor(γ|V| + 0.5)` entries are green.
//!
//! This hashing scheme is specific to this crate and does not interoperate
//! with watermarks produced by other implementations.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix64, SplitMix64};
use crate::token::TokenId;

/// Secret shared by the inserting and detecting side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedKey(pub u64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("green ratio must lie strictly between 0 and 1, got {0}")]
    InvalidGamma(f64),
    #[error("vocabulary must have at least 2 entries, got {0}")]
    VocabTooSmall(usize),
    #[error("token {token} is outside a vocabulary of size {vocab_size}")]
    OutOfVocabulary { token: TokenId, vocab_size: usize },
}

pub fn check_gamma(gamma: f64) -> Result<(), PartitionError> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(PartitionError::InvalidGamma(gamma))
    }
}

/// Green-list size for a vocabulary, rounding half up.
pub fn green_size(vocab_size: usize, gamma: f64) -> usize {
    ((gamma * vocab_size as f64 + 0.5).floor() as usize).min(vocab_size)
}

pub fn seed_from_token(prev: TokenId, key: SeedKey) -> u64 {
    mix64(u64::from(prev.0) ^ key.0)
}

/// One step's split of the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabPartition {
    green: Vec<bool>,
    green_count: usize,
}

impl VocabPartition {
    /// Builds a partition from an explicit green list.
    pub fn from_green(vocab_size: usize, green: &[TokenId]) -> Result<Self, PartitionError> {
        let mut mask = vec![false; vocab_size];
        for &t in green {
            *mask.get_mut(t.index()).ok_or(PartitionError::OutOfVocabulary {
                token: t,
                vocab_size,
            })? = true;
        }
        let green_count = mask.iter().filter(|&&g| g).count();
        Ok(VocabPartition {
            green: mask,
            green_count,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.green.len()
    }

    pub fn green_count(&self) -> usize {
        self.green_count
    }

    pub fn is_green(&self, token: TokenId) -> bool {
        self.green.get(token.index()).copied().unwrap_or(false)
    }

    pub fn green(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.members(true)
    }

    pub fn red(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.members(false)
    }

    fn members(&self, colour: bool) -> impl Iterator<Item = TokenId> + '_ {
        self.green
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == colour)
            .map(|(i, _)| TokenId(i as u32))
    }

    /// Membership as a packed little-endian bitmap, one bit per token.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.green.len().div_ceil(8)];
        for (i, &g) in self.green.iter().enumerate() {
            if g {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        bytes
    }
}

/// Seeded shuffle of `0..vocab_size`.
pub fn permutation(vocab_size: usize, seed: u64) -> Vec<u32> {
    let mut order: Vec<u32> = (0..vocab_size as u32).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..vocab_size).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

pub fn split(vocab_size: usize, gamma: f64, seed: u64) -> Result<VocabPartition, PartitionError> {
    check_gamma(gamma)?;
    if vocab_size < 2 {
        return Err(PartitionError::VocabTooSmall(vocab_size));
    }
    let green_count = green_size(vocab_size, gamma);
    let mut green = vec![false; vocab_size];
    for &id in &permutation(vocab_size, seed)[..green_count] {
        green[id as usize] = true;
    }
    Ok(VocabPartition { green, green_count })
}

pub fn is_green(partition: &VocabPartition, token: TokenId) -> bool {
    partition.is_green(token)
}

/// Everything needed to recompute partitions: vocabulary size, ratio, key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partitioner {
    pub vocab_size: usize,
    pub gamma: f64,
    pub key: SeedKey,
}

impl Partitioner {
    pub fn new(vocab_size: usize, gamma: f64, key: SeedKey) -> Result<Self, PartitionError> {
        check_gamma(gamma)?;
        if vocab_size < 2 {
            return Err(PartitionError::VocabTooSmall(vocab_size));
        }
        Ok(Partitioner {
            vocab_size,
            gamma,
            key,
        })
    }

    /// The split used for the token that follows `prev`.
    pub fn after(&self, prev: TokenId) -> VocabPartition {
        split(self.vocab_size, self.gamma, seed_from_token(prev, self.key))
            .expect("parameters validated at construction")
    }
}

/// Memoizes partitions by previous token. Meant for one detection batch.
#[derive(Debug)]
pub struct PartitionCache {
    partitioner: Partitioner,
    cache: HashMap<TokenId, Arc<VocabPartition>>,
    capacity: usize,
}

impl PartitionCache {
    pub fn new(partitioner: Partitioner) -> Self {
        // bound memory to roughly 64 MiB of masks
        let capacity = (64 << 20) / partitioner.vocab_size.max(1);
        PartitionCache {
            partitioner,
            cache: HashMap::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn partitioner(&self) -> &Partitioner {
        &self.partitioner
    }

    pub fn after(&mut self, prev: TokenId) -> Arc<VocabPartition> {
        if let Some(p) = self.cache.get(&prev) {
            return Arc::clone(p);
        }
        if self.cache.len() >= self.capacity {
            self.cache.clear();
        }
        let p = Arc::new(self.partitioner.after(prev));
        self.cache.insert(prev, Arc::clone(&p));
        p
    }
}
