//! Token ids, logit and probability vectors, and the sampling primitives
//! shared by the insertion engine, the detector and the metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

/// Normalization tolerance for [`ProbVector`].
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Index into a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for TokenId {
    fn from(id: u32) -> Self {
        TokenId(id)
    }
}

impl std::fmt::Display for TokenId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An ordered run of tokens, optionally with the text it decodes to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<TokenId>) -> Self {
        TokenSequence {
            tokens,
            source_text: None,
        }
    }

    pub fn from_ids(ids: &[u32]) -> Self {
        Self::new(ids.iter().copied().map(TokenId).collect())
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.source_text = Some(text.into());
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn last(&self) -> Option<TokenId> {
        self.tokens.last().copied()
    }

    /// Checks every id against a vocabulary of `vocab_size` entries.
    pub fn validate(&self, vocab_size: usize) -> Result<(), TokenError> {
        match self.tokens.iter().find(|t| t.index() >= vocab_size) {
            Some(&token) => Err(TokenError::OutOfVocabulary { token, vocab_size }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenError {
    #[error("vector is empty")]
    Empty,
    #[error("entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("entry {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("top-k requires 1 <= k <= {vocab_size}, got k = {k}")]
    InvalidTopK { k: usize, vocab_size: usize },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("cannot sample from an all-zero distribution")]
    Degenerate,
    #[error("token {token} is outside a vocabulary of size {vocab_size}")]
    OutOfVocabulary { token: TokenId, vocab_size: usize },
}

/// Raw model scores, one per vocabulary entry. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self, TokenError> {
        if values.is_empty() {
            return Err(TokenError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TokenError::NonFinite { index, value });
        }
        Ok(LogitVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Divides every logit by `temperature`.
    pub fn scaled(&self, temperature: f64) -> Result<LogitVector, TokenError> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(TokenError::InvalidTemperature(temperature));
        }
        if temperature == 1.0 {
            return Ok(self.clone());
        }
        LogitVector::new(self.0.iter().map(|l| l / temperature).collect())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A probability distribution over the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates entries in `[0, 1]` summing to 1 within [`PROB_TOLERANCE`].
    pub fn new(values: Vec<f64>) -> Result<Self, TokenError> {
        if values.is_empty() {
            return Err(TokenError::Empty);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(TokenError::NonFinite { index, value });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(TokenError::OutOfRange { index, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(TokenError::NotNormalized { sum });
        }
        Ok(ProbVector(values))
    }

    pub fn uniform(size: usize) -> Result<Self, TokenError> {
        if size == 0 {
            return Err(TokenError::Empty);
        }
        Ok(ProbVector(vec![1.0 / size as f64; size]))
    }

    pub fn one_hot(size: usize, hot: TokenId) -> Result<Self, TokenError> {
        if hot.index() >= size {
            return Err(TokenError::OutOfVocabulary {
                token: hot,
                vocab_size: size,
            });
        }
        let mut values = vec![0.0; size];
        values[hot.index()] = 1.0;
        Ok(ProbVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, token: TokenId) -> f64 {
        self.0.get(token.index()).copied().unwrap_or(0.0)
    }

    /// Total mass assigned to the given tokens.
    pub fn mass<'a>(&self, tokens: impl IntoIterator<Item = &'a TokenId>) -> f64 {
        tokens.into_iter().map(|&t| self.get(t)).sum()
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &LogitVector) -> ProbVector {
    let values = logits.values();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbVector(exps.into_iter().map(|e| e / total).collect())
}

/// Zeroes everything outside the `k` most probable entries and renormalizes.
///
/// Ties at the k-th rank go to the lower token id.
pub fn top_k_restrict(probs: &ProbVector, k: usize) -> Result<ProbVector, TokenError> {
    let size = probs.len();
    if k == 0 || k > size {
        return Err(TokenError::InvalidTopK {
            k,
            vocab_size: size,
        });
    }
    if k == size {
        return Ok(probs.clone());
    }
    let values = probs.values();
    let mut order: Vec<usize> = (0..size).collect();
    let by_rank = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    order.select_nth_unstable_by(k - 1, by_rank);

    let mut kept = vec![0.0; size];
    let mut total = 0.0;
    for &i in &order[..k] {
        kept[i] = values[i];
        total += values[i];
    }
    if total <= 0.0 {
        return Err(TokenError::Degenerate);
    }
    for v in kept.iter_mut() {
        *v /= total;
    }
    Ok(ProbVector(kept))
}

/// Inverse-CDF draw: one uniform in `[0, 1)` from `rng`, walked over the
/// cumulative sums. Exactly one generator output is consumed per call.
pub fn sample(probs: &ProbVector, rng: &mut SplitMix64) -> Result<TokenId, TokenError> {
    let values = probs.values();
    let last_nonzero = values
        .iter()
        .rposition(|&p| p > 0.0)
        .ok_or(TokenError::Degenerate)?;
    let u = rng.next_f64();
    let mut cumulative = 0.0;
    for (i, &p) in values.iter().enumerate().take(last_nonzero) {
        cumulative += p;
        if p > 0.0 && u < cumulative {
            return Ok(TokenId(i as u32));
        }
    }
    Ok(TokenId(last_nonzero as u32))
}

/// The sampling knobs that shape a step distribution before drawing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    /// `None` keeps the full vocabulary.
    pub top_k: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: 1.0,
            top_k: Some(50),
        }
    }
}

impl SamplingConfig {
    /// Temperature 1 over the full vocabulary.
    pub fn full() -> Self {
        SamplingConfig {
            temperature: 1.0,
            top_k: None,
        }
    }

    /// Temperature, then softmax, then top-k.
    pub fn distribution(&self, logits: &LogitVector) -> Result<ProbVector, TokenError> {
        let probs = softmax(&logits.scaled(self.temperature)?);
        match self.top_k {
            Some(k) => top_k_restrict(&probs, k.min(probs.len())),
            None => Ok(probs),
        }
    }
}
