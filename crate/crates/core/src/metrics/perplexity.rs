use serde::{Deserialize, Serialize};

use super::analysis::ScoredSample;
use super::MetricsError;
use crate::model::LogitProvider;
use crate::token::TokenId;

/// `exp(-mean log p)`. An empty slice has perplexity 1.
pub fn perplexity_from_log_probs(log_probs: &[f64]) -> f64 {
    if log_probs.is_empty() {
        return 1.0;
    }
    let mean = log_probs.iter().sum::<f64>() / log_probs.len() as f64;
    (-mean).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePpl {
    pub tokens: usize,
    pub nll_sum: f64,
    pub ppl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPpl {
    pub samples: Vec<SamplePpl>,
    /// Mean of the per-sample perplexities.
    pub mean_ppl: f64,
    /// Samples with no completion tokens, left out of the mean.
    pub skipped_empty: usize,
    /// Samples whose perplexity overflowed.
    pub infinite: usize,
}

fn log_softmax_at(logits: &[f64], token: TokenId) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    logits[token.index()] - lse
}

/// Completion log-probabilities under the unmodified model: temperature 1,
/// full vocabulary, context `prompt ++ completion[..t]`.
pub fn completion_log_probs(
    provider: &dyn LogitProvider,
    sample: &ScoredSample,
) -> Result<Vec<f64>, MetricsError> {
    let mut context = sample.prompt.clone();
    let mut out = Vec::with_capacity(sample.completion.len());
    for &token in &sample.completion {
        let logits = provider.logits(&context)?;
        if token.index() >= logits.len() {
            return Err(MetricsError::Token(crate::token::TokenError::OutOfVocabulary {
                token,
                vocab_size: logits.len(),
            }));
        }
        out.push(log_softmax_at(logits.values(), token));
        context.push(token);
    }
    Ok(out)
}

pub fn corpus_perplexity(
    provider: &dyn LogitProvider,
    samples: &[ScoredSample],
) -> Result<CorpusPpl, MetricsError> {
    let mut per_sample = Vec::new();
    let mut skipped_empty = 0;
    for sample in samples {
        if sample.completion.is_empty() {
            skipped_empty += 1;
            continue;
        }
        let lp = completion_log_probs(provider, sample)?;
        per_sample.push(SamplePpl {
            tokens: lp.len(),
            nll_sum: -lp.iter().sum::<f64>(),
            ppl: perplexity_from_log_probs(&lp),
        });
    }
    if per_sample.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let infinite = per_sample.iter().filter(|s| !s.ppl.is_finite()).count();
    let mean_ppl = per_sample.iter().map(|s| s.ppl).sum::<f64>() / per_sample.len() as f64;
    Ok(CorpusPpl {
        samples: per_sample,
        mean_ppl,
        skipped_empty,
        infinite,
    })
}

/// `1 - (ppl_wm - ppl_ref) / ppl_ref`. Can be negative.
pub fn imperceptibility(ppl_wm: f64, ppl_ref: f64) -> Result<f64, MetricsError> {
    if !(ppl_ref.is_finite() && ppl_ref > 0.0) {
        return Err(MetricsError::InvalidReferencePpl(ppl_ref));
    }
    Ok(1.0 - (ppl_wm - ppl_ref) / ppl_ref)
}
