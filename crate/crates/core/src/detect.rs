//! Watermark detection by counting green tokens.
//!
//! Position 0 is never counted: its partition was seeded by the last prompt
//! token, which the detector does not see. The syntax-filtered detector and
//! the full-sequence detector need no model. The entropy-gated detector
//! queries the model once per scored position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::entropy;
use crate::model::{LogitProvider, ProviderError};
use crate::partition::{PartitionCache, PartitionError, Partitioner, SeedKey};
use crate::syntax::VocabularyProfile;
use crate::token::{SamplingConfig, TokenError, TokenId, TokenSequence};
use crate::tokenizer::{TokenizeError, Tokenizer};

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("z threshold must be finite, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub gamma: f64,
    pub key: SeedKey,
    pub z_threshold: f64,
}

impl DetectConfig {
    pub fn new(gamma: f64, key: SeedKey) -> Self {
        DetectConfig {
            gamma,
            key,
            z_threshold: DEFAULT_Z_THRESHOLD,
        }
    }

    fn partitioner(&self, vocab_size: usize) -> Result<Partitioner, DetectError> {
        if !self.z_threshold.is_finite() {
            return Err(DetectError::InvalidThreshold(self.z_threshold));
        }
        Ok(Partitioner::new(vocab_size, self.gamma, self.key)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMethod {
    /// Only non-syntax tokens are counted.
    SyntaxFiltered,
    /// Every token after the first is counted.
    Full,
    /// Tokens whose model entropy exceeds a threshold are counted.
    EntropyGated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSource {
    TokenIds,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub token: TokenId,
    pub counted: bool,
    pub green: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: DetectionMethod,
    pub source: InputSource,
    pub gamma: f64,
    pub z_threshold: f64,
    pub sequence_length: usize,
    pub counted: usize,
    pub green: usize,
    /// `None` when nothing was counted.
    pub z: Option<f64>,
    pub verdict: bool,
    pub undetectable: bool,
    pub first_token_skipped: bool,
    pub trace: Vec<TraceEntry>,
}

impl DetectionReport {
    pub fn green_fraction(&self) -> Option<f64> {
        (self.counted > 0).then(|| self.green as f64 / self.counted as f64)
    }
}

/// `(green - γN) / sqrt(γ(1-γ)N)`, undefined for `N = 0`.
pub fn z_score(green: usize, counted: usize, gamma: f64) -> Option<f64> {
    if counted == 0 {
        return None;
    }
    let n = counted as f64;
    Some((green as f64 - gamma * n) / (gamma * (1.0 - gamma) * n).sqrt())
}

/// Reusable detector for batches: partitions are cached by previous token.
#[derive(Debug)]
pub struct Detector {
    config: DetectConfig,
    cache: PartitionCache,
}

impl Detector {
    pub fn new(vocab_size: usize, config: DetectConfig) -> Result<Self, DetectError> {
        let partitioner = config.partitioner(vocab_size)?;
        Ok(Detector {
            config,
            cache: PartitionCache::new(partitioner),
        })
    }

    pub fn config(&self) -> &DetectConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.cache.partitioner().vocab_size
    }

    /// Green ids of the partition the detector uses after `prev`.
    pub fn green_list_after(&mut self, prev: TokenId) -> Vec<TokenId> {
        self.cache.after(prev).green().collect()
    }

    pub fn green_bitmap_after(&mut self, prev: TokenId) -> Vec<u8> {
        self.cache.after(prev).to_bytes()
    }

    pub fn stone(&mut self, seq: &TokenSequence, profile: &VocabularyProfile) -> Result<DetectionReport, DetectError> {
        self.run(seq, DetectionMethod::SyntaxFiltered, |_, t| !profile.is_syntax(t))
    }

    pub fn full(&mut self, seq: &TokenSequence) -> Result<DetectionReport, DetectError> {
        self.run(seq, DetectionMethod::Full, |_, _| true)
    }

    fn run(
        &mut self,
        seq: &TokenSequence,
        method: DetectionMethod,
        mut counts: impl FnMut(usize, TokenId) -> bool,
    ) -> Result<DetectionReport, DetectError> {
        seq.validate(self.vocab_size())?;
        let tokens = &seq.tokens;
        let mut trace = Vec::with_capacity(tokens.len());
        let (mut counted, mut green) = (0usize, 0usize);
        for (t, &token) in tokens.iter().enumerate() {
            let mut entry = TraceEntry {
                token,
                counted: false,
                green: false,
            };
            if t > 0 && counts(t, token) {
                entry.counted = true;
                entry.green = self.cache.after(tokens[t - 1]).is_green(token);
                counted += 1;
                green += usize::from(entry.green);
            }
            trace.push(entry);
        }
        Ok(self.report(method, tokens.len(), counted, green, trace))
    }

    fn report(
        &self,
        method: DetectionMethod,
        sequence_length: usize,
        counted: usize,
        green: usize,
        trace: Vec<TraceEntry>,
    ) -> DetectionReport {
        let z = z_score(green, counted, self.config.gamma);
        DetectionReport {
            method,
            source: InputSource::TokenIds,
            gamma: self.config.gamma,
            z_threshold: self.config.z_threshold,
            sequence_length,
            counted,
            green,
            z,
            verdict: z.is_some_and(|z| z > self.config.z_threshold),
            undetectable: z.is_none(),
            first_token_skipped: sequence_length > 0,
            trace,
        }
    }
}

/// Counts only non-syntax tokens. Never touches a model.
pub fn detect_stone(
    seq: &TokenSequence,
    profile: &VocabularyProfile,
    config: &DetectConfig,
) -> Result<DetectionReport, DetectError> {
    Detector::new(profile.vocab_size(), *config)?.stone(seq, profile)
}

/// Counts every token after the first.
pub fn detect_full(
    seq: &TokenSequence,
    vocab_size: usize,
    config: &DetectConfig,
) -> Result<DetectionReport, DetectError> {
    Detector::new(vocab_size, *config)?.full(seq)
}

/// Tokenizes `code` and runs [`detect_stone`] on the ids.
pub fn detect_from_text(
    code: &str,
    tokenizer: &dyn Tokenizer,
    profile: &VocabularyProfile,
    config: &DetectConfig,
) -> Result<DetectionReport, DetectError> {
    if tokenizer.vocab_size() != profile.vocab_size() {
        return Err(TokenizeError::VocabMismatch {
            tokenizer: tokenizer.vocab_size(),
            profile: profile.vocab_size(),
        }
        .into());
    }
    let tokens = tokenizer.encode(code)?;
    if let Some(&token) = tokens.iter().find(|t| t.index() >= profile.vocab_size()) {
        return Err(TokenizeError::OutOfVocabulary {
            token,
            vocab_size: profile.vocab_size(),
        }
        .into());
    }
    let mut report = detect_stone(&TokenSequence::new(tokens), profile, config)?;
    report.source = InputSource::Text;
    Ok(report)
}

/// Counts positions whose distribution entropy (after `sampling`) exceeds
/// `threshold`. One provider call per position `t >= 1`, with context
/// `prompt ++ seq[..t]`.
pub fn detect_entropy_gated(
    prompt: &[TokenId],
    seq: &TokenSequence,
    provider: &dyn LogitProvider,
    sampling: &SamplingConfig,
    threshold: f64,
    config: &DetectConfig,
) -> Result<DetectionReport, DetectError> {
    let mut detector = Detector::new(provider.vocab_size(), *config)?;
    let mut context: Vec<TokenId> = prompt.to_vec();
    context.extend(seq.tokens.first());
    let mut failure = None;
    let report = detector.run(seq, DetectionMethod::EntropyGated, |t, _| {
        if failure.is_some() {
            return false;
        }
        let gated = provider
            .logits(&context)
            .map_err(DetectError::from)
            .and_then(|l| Ok(sampling.distribution(&l)?))
            .map(|p| entropy(&p) > threshold);
        context.push(seq.tokens[t]);
        match gated {
            Ok(g) => g,
            Err(e) => {
                failure = Some(e);
                false
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
