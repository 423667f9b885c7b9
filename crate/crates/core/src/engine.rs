//! The insertion loop. One engine serves three gating policies:
//! `Always` (every step is watermarked), `NonSyntax` (only steps whose
//! candidate token is outside the syntax set) and `EntropyThreshold`
//! (only steps whose distribution entropy exceeds a threshold).
//!
//! Each step draws a candidate from the base distribution, evaluates the
//! gate on it, and then draws the emitted token from either the boosted
//! distribution (gate fired) or the base distribution (gate closed). The
//! candidate itself is never emitted directly, so every step consumes
//! exactly two generator outputs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::entropy;
use crate::model::{LogitProvider, ProviderError};
use crate::partition::{check_gamma, seed_from_token, split, PartitionError, SeedKey, VocabPartition};
use crate::rng::SplitMix64;
use crate::syntax::VocabularyProfile;
use crate::token::{sample, softmax, top_k_restrict, LogitVector, ProbVector, SamplingConfig, TokenError, TokenId, TokenSequence};

/// Entropy thresholds examined for entropy-gated insertion (nats).
pub const SWEET_THRESHOLDS: [f64; 5] = [0.7, 0.8, 0.9, 1.0, 1.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "kebab-case")]
pub enum Gate {
    Always,
    NonSyntax,
    EntropyThreshold(f64),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::Always => "always",
            Gate::NonSyntax => "non-syntax",
            Gate::EntropyThreshold(_) => "entropy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkParams {
    pub gamma: f64,
    pub delta: f64,
    pub key: SeedKey,
    pub gate: Gate,
    pub sampling: SamplingConfig,
    pub max_tokens: usize,
    #[serde(default)]
    pub stop_tokens: Vec<TokenId>,
}

impl Default for WatermarkParams {
    fn default() -> Self {
        WatermarkParams {
            gamma: 0.5,
            delta: 1.0,
            key: SeedKey(15485863),
            gate: Gate::NonSyntax,
            sampling: SamplingConfig::default(),
            max_tokens: 256,
            stop_tokens: Vec::new(),
        }
    }
}

impl WatermarkParams {
    /// `δ = 0` passes: it is the null control used in tests and sweeps.
    pub fn validate(&self) -> Result<(), EngineError> {
        check_gamma(self.gamma)?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(EngineError::InvalidParams(format!(
                "delta must be finite and non-negative, got {}",
                self.delta
            )));
        }
        if self.sampling.top_k == Some(0) {
            return Err(EngineError::InvalidParams("top_k must be at least 1".into()));
        }
        if !(self.sampling.temperature.is_finite() && self.sampling.temperature > 0.0) {
            return Err(TokenError::InvalidTemperature(self.sampling.temperature).into());
        }
        if let Gate::EntropyThreshold(h) = self.gate {
            if !(h.is_finite() && h >= 0.0) {
                return Err(EngineError::InvalidParams(format!(
                    "entropy threshold must be finite and non-negative, got {h}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("a non-empty prompt is required to seed the first step")]
    EmptyContext,
    #[error("invalid watermark parameters: {0}")]
    InvalidParams(String),
    #[error("provider vocabulary has {provider} entries but the profile has {profile}")]
    VocabMismatch { provider: usize, profile: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// What happened at one generation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub candidate: TokenId,
    pub gated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_seed: Option<u64>,
    pub token: TokenId,
    /// Entropy of the base distribution, in nats.
    pub entropy: f64,
    /// Probability of the emitted token under the base distribution.
    pub base_prob: f64,
    /// Probability of the emitted token under the distribution it was drawn from.
    pub final_prob: f64,
    /// Gate fired on a non-syntax candidate but the emitted token is syntax.
    pub gated_then_syntax: bool,
}

/// A step with both distributions kept, for analysis.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub token: TokenId,
    pub log: StepLog,
    pub base: ProbVector,
    pub adjusted: ProbVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error", rename_all = "lowercase")]
pub enum GenerationStatus {
    Complete,
    /// Provider failure mid-sequence; the record holds the steps before it.
    Incomplete(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub output: TokenSequence,
    pub steps: Vec<StepLog>,
    pub status: GenerationStatus,
}

impl GenerationRecord {
    pub fn is_complete(&self) -> bool {
        self.status == GenerationStatus::Complete
    }

    pub fn gated_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.gated).count()
    }

    /// Gated steps whose emitted token landed in the syntax set anyway.
    pub fn diluted_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.gated_then_syntax).count()
    }
}

/// Adds `delta` to every green logit.
pub fn boost(logits: &LogitVector, partition: &VocabPartition, delta: f64) -> LogitVector {
    let mut boosted = logits.clone();
    for t in partition.green() {
        boosted.values_mut()[t.index()] += delta;
    }
    boosted
}

fn restrict(probs: ProbVector, sampling: &SamplingConfig) -> Result<ProbVector, TokenError> {
    match sampling.top_k {
        Some(k) => top_k_restrict(&probs, k.min(probs.len())),
        None => Ok(probs),
    }
}

/// Runs one insertion step and keeps both distributions.
pub fn step_detailed(
    provider: &dyn LogitProvider,
    context: &[TokenId],
    params: &WatermarkParams,
    profile: &VocabularyProfile,
    rng: &mut SplitMix64,
) -> Result<StepOutcome, EngineError> {
    let prev = *context.last().ok_or(EngineError::EmptyContext)?;
    let vocab_size = profile.vocab_size();
    if provider.vocab_size() != vocab_size {
        return Err(EngineError::VocabMismatch {
            provider: provider.vocab_size(),
            profile: vocab_size,
        });
    }
    let logits = provider.logits(context)?;
    if logits.len() != vocab_size {
        return Err(EngineError::VocabMismatch {
            provider: logits.len(),
            profile: vocab_size,
        });
    }
    let scaled = logits.scaled(params.sampling.temperature)?;
    let base = restrict(softmax(&scaled), &params.sampling)?;
    let step_entropy = entropy(&base);
    let candidate = sample(&base, rng)?;

    let fire = match params.gate {
        Gate::Always => true,
        Gate::NonSyntax => !profile.is_syntax(candidate),
        Gate::EntropyThreshold(h) => step_entropy > h,
    };

    let (adjusted, partition_seed) = if fire {
        let seed = seed_from_token(prev, params.key);
        let partition = split(vocab_size, params.gamma, seed)?;
        let boosted = boost(&scaled, &partition, params.delta);
        (restrict(softmax(&boosted), &params.sampling)?, Some(seed))
    } else {
        (base.clone(), None)
    };
    let token = sample(&adjusted, rng)?;

    let log = StepLog {
        candidate,
        gated: fire,
        partition_seed,
        token,
        entropy: step_entropy,
        base_prob: base.get(token),
        final_prob: adjusted.get(token),
        gated_then_syntax: fire && !profile.is_syntax(candidate) && profile.is_syntax(token),
    };
    Ok(StepOutcome {
        token,
        log,
        base,
        adjusted,
    })
}

pub fn step(
    provider: &dyn LogitProvider,
    context: &[TokenId],
    params: &WatermarkParams,
    profile: &VocabularyProfile,
    rng: &mut SplitMix64,
) -> Result<(TokenId, StepLog), EngineError> {
    let outcome = step_detailed(provider, context, params, profile, rng)?;
    Ok((outcome.token, outcome.log))
}

/// Generates up to `max_tokens` tokens after `prompt`, stopping early after
/// emitting any stop token. Provider failures end the loop and mark the
/// record incomplete; parameter and vocabulary errors are returned.
pub fn generate(
    provider: &dyn LogitProvider,
    prompt: &TokenSequence,
    params: &WatermarkParams,
    profile: &VocabularyProfile,
    rng: &mut SplitMix64,
) -> Result<GenerationRecord, EngineError> {
    params.validate()?;
    if prompt.is_empty() {
        return Err(EngineError::EmptyContext);
    }
    prompt
        .validate(profile.vocab_size())
        .map_err(EngineError::Token)?;
    if provider.vocab_size() != profile.vocab_size() {
        return Err(EngineError::VocabMismatch {
            provider: provider.vocab_size(),
            profile: profile.vocab_size(),
        });
    }
    let stops: HashSet<TokenId> = params.stop_tokens.iter().copied().collect();
    let mut context = prompt.tokens.clone();
    let mut output = Vec::with_capacity(params.max_tokens);
    let mut steps = Vec::with_capacity(params.max_tokens);
    let mut status = GenerationStatus::Complete;

    while output.len() < params.max_tokens {
        match step(provider, &context, params, profile, rng) {
            Ok((token, log)) => {
                context.push(token);
                output.push(token);
                steps.push(log);
                if stops.contains(&token) {
                    break;
                }
            }
            Err(EngineError::Provider(e)) => {
                status = GenerationStatus::Incomplete(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let text = profile.decode(&output);
    Ok(GenerationRecord {
        output: TokenSequence::new(output).with_text(text),
        steps,
        status,
    })
}

/// Green probability mass before and after boosting green logits by `delta`.
pub fn green_mass_shift(base: &ProbVector, partition: &VocabPartition, delta: f64) -> (f64, f64) {
    let before = base.mass(partition.green().collect::<Vec<_>>().iter());
    let scale = delta.exp();
    let after = if before <= 0.0 {
        0.0
    } else if before >= 1.0 {
        1.0
    } else {
        before * scale / (before * scale + (1.0 - before))
    };
    (before, after)
}
