//! The logit-provider contract and a deterministic first-order toy model.
//!
//! The remote HTTP provider lives in [`crate::remote`].

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::syntax::VocabularyProfile;
use crate::token::{LogitVector, TokenId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("request {request_id}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        request_id: String,
        attempts: u32,
        message: String,
    },
    #[error("request {request_id}: expected {expected} logits, got {actual}")]
    LengthMismatch {
        request_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("request {request_id}: logit {index} is not finite")]
    NonFinite { request_id: String, index: usize },
    #[error("request {request_id}: malformed response: {message}")]
    Protocol { request_id: String, message: String },
    #[error("context token {token} is outside a vocabulary of size {vocab_size}")]
    InvalidContext { token: TokenId, vocab_size: usize },
}

/// Anything that maps a context to next-token logits over a fixed vocabulary.
///
/// Implementations count every logit request; detection code never calls
/// into a provider, so the counter doubles as evidence of that.
pub trait LogitProvider: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn logits(&self, context: &[TokenId]) -> Result<LogitVector, ProviderError>;

    /// Logit requests served since construction.
    fn call_count(&self) -> u64;
}

impl<P: LogitProvider + ?Sized> LogitProvider for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn logits(&self, context: &[TokenId]) -> Result<LogitVector, ProviderError> {
        (**self).logits(context)
    }

    fn call_count(&self) -> u64 {
        (**self).call_count()
    }
}

impl<P: LogitProvider + ?Sized> LogitProvider for Box<P> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn logits(&self, context: &[TokenId]) -> Result<LogitVector, ProviderError> {
        (**self).logits(context)
    }

    fn call_count(&self) -> u64 {
        (**self).call_count()
    }
}

pub fn call_count(provider: &dyn LogitProvider) -> u64 {
    provider.call_count()
}

/// Knobs for [`ToyModelSpec::random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Probability that a row is a syntax row, where syntax tokens dominate.
    pub syntax_burst: f64,
    /// Half-width of the uniform logit noise on every entry.
    pub spread: f64,
    /// Offset added to syntax-token logits in ordinary rows.
    pub syntax_offset: f64,
    /// Offset added to syntax-token logits in syntax rows.
    pub burst_offset: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            syntax_burst: 0.15,
            spread: 2.0,
            syntax_offset: -1.0,
            burst_offset: 4.0,
        }
    }
}

/// Logit table of a first-order model: one row per previous token plus a
/// start row used when the context is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModelSpec {
    pub vocab_size: usize,
    pub start: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub syntax_burst: f64,
}

impl ToyModelSpec {
    /// Every row uniform.
    pub fn uniform(vocab_size: usize) -> Self {
        ToyModelSpec {
            vocab_size,
            start: vec![0.0; vocab_size],
            rows: vec![vec![0.0; vocab_size]; vocab_size],
            syntax_burst: 0.0,
        }
    }

    /// Rows drawn from `SplitMix64::new(seed)`: uniform noise in
    /// `[-spread, spread]` per entry, syntax entries shifted by
    /// `burst_offset` in syntax rows (chosen with probability `syntax_burst`)
    /// and by `syntax_offset` elsewhere.
    pub fn random(profile: &VocabularyProfile, config: ToyConfig, seed: u64) -> Self {
        let v = profile.vocab_size();
        let syntax: Vec<bool> = (0..v)
            .map(|i| profile.is_syntax(TokenId(i as u32)))
            .collect();
        let mut rng = SplitMix64::new(seed);
        let row = |rng: &mut SplitMix64| {
            let burst = rng.next_f64() < config.syntax_burst;
            let offset = if burst {
                config.burst_offset
            } else {
                config.syntax_offset
            };
            (0..v)
                .map(|i| {
                    let noise = (2.0 * rng.next_f64() - 1.0) * config.spread;
                    if syntax[i] {
                        noise + offset
                    } else {
                        noise
                    }
                })
                .collect::<Vec<f64>>()
        };
        let start = row(&mut rng);
        let rows = (0..v).map(|_| row(&mut rng)).collect();
        ToyModelSpec {
            vocab_size: v,
            start,
            rows,
            syntax_burst: config.syntax_burst,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.vocab_size == 0 {
            return Err("toy model needs a non-empty vocabulary".into());
        }
        if self.rows.len() != self.vocab_size {
            return Err(format!(
                "toy model has {} rows for a vocabulary of {}",
                self.rows.len(),
                self.vocab_size
            ));
        }
        for (i, row) in std::iter::once(&self.start).chain(&self.rows).enumerate() {
            if row.len() != self.vocab_size {
                return Err(format!("toy row {i} has length {}", row.len()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(format!("toy row {i} has a non-finite logit"));
            }
        }
        Ok(())
    }

    pub fn row_for(&self, context: &[TokenId]) -> Result<&[f64], ProviderError> {
        match context.last() {
            None => Ok(&self.start),
            Some(&t) => self
                .rows
                .get(t.index())
                .map(Vec::as_slice)
                .ok_or(ProviderError::InvalidContext {
                    token: t,
                    vocab_size: self.vocab_size,
                }),
        }
    }
}

/// Logits of the toy model for `context`; only the last token matters.
pub fn toy_logits(spec: &ToyModelSpec, context: &[TokenId]) -> Result<LogitVector, ProviderError> {
    let row = spec.row_for(context)?;
    LogitVector::new(row.to_vec()).map_err(|_| ProviderError::NonFinite {
        request_id: "toy".into(),
        index: row.iter().position(|x| !x.is_finite()).unwrap_or(0),
    })
}

/// In-process provider backed by a [`ToyModelSpec`].
#[derive(Debug)]
pub struct ToyProvider {
    spec: ToyModelSpec,
    calls: AtomicU64,
}

impl ToyProvider {
    pub fn new(spec: ToyModelSpec) -> Result<Self, String> {
        spec.validate()?;
        Ok(ToyProvider {
            spec,
            calls: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &ToyModelSpec {
        &self.spec
    }
}

impl LogitProvider for ToyProvider {
    fn vocab_size(&self) -> usize {
        self.spec.vocab_size
    }

    fn logits(&self, context: &[TokenId]) -> Result<LogitVector, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        toy_logits(&self.spec, context)
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Decode table for toy experiments: every lexeme of the profile's lists
/// (non-whitespace ones with a leading space), then `identifiers` names of
/// the form `" v0"`, `" v1"`, ...
///
/// Every entry except the whitespace ones starts with a space and contains
/// no other whitespace, so greedy longest-match re-tokenization of decoded
/// output recovers the original ids.
pub fn toy_decode_table(profile: &crate::syntax::LanguageProfile, identifiers: usize) -> Vec<String> {
    let mut table: Vec<String> = profile.whitespace.clone();
    for list in [
        &profile.keywords,
        &profile.types,
        &profile.delimiters,
        &profile.operators,
    ] {
        table.extend(list.iter().map(|l| format!(" {l}")));
    }
    table.extend((0..identifiers).map(|i| format!(" v{i}")));
    table
}
