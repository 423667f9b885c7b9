use serde::{Deserialize, Serialize};

use super::entropy::entropy;
use super::MetricsError;
use crate::model::LogitProvider;
use crate::syntax::{CategoryCounts, TokenCategory, VocabularyProfile};
use crate::token::{SamplingConfig, TokenId};

/// A prompt and the completion scored against it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub prompt: Vec<TokenId>,
    pub completion: Vec<TokenId>,
}

impl ScoredSample {
    pub fn new(prompt: Vec<TokenId>, completion: Vec<TokenId>) -> Self {
        ScoredSample { prompt, completion }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub token: TokenId,
    pub category: TokenCategory,
    /// Entropy (nats) of the distribution the token was drawn from.
    pub entropy: f64,
}

/// One provider call per completion token, context `prompt ++ completion[..t]`.
pub fn score_steps(
    provider: &dyn LogitProvider,
    profile: &VocabularyProfile,
    sampling: &SamplingConfig,
    sample: &ScoredSample,
) -> Result<Vec<StepScore>, MetricsError> {
    let mut context = sample.prompt.clone();
    let mut out = Vec::with_capacity(sample.completion.len());
    for &token in &sample.completion {
        let dist = sampling.distribution(&provider.logits(&context)?)?;
        out.push(StepScore {
            token,
            category: profile.category(token),
            entropy: entropy(&dist),
        });
        context.push(token);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMean {
    pub category: TokenCategory,
    pub count: usize,
    /// `None` when the category never occurred.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEntropyMeans {
    pub categories: Vec<CategoryMean>,
    pub overall: Option<f64>,
    pub steps: usize,
}

impl CategoryEntropyMeans {
    pub fn mean(&self, category: TokenCategory) -> Option<f64> {
        self.categories
            .iter()
            .find(|c| c.category == category)
            .and_then(|c| c.mean)
    }
}

pub fn entropy_means_from_trace(steps: &[StepScore]) -> CategoryEntropyMeans {
    let categories = TokenCategory::ALL
        .iter()
        .map(|&category| {
            let values: Vec<f64> = steps
                .iter()
                .filter(|s| s.category == category)
                .map(|s| s.entropy)
                .collect();
            CategoryMean {
                category,
                count: values.len(),
                mean: mean(&values),
            }
        })
        .collect();
    let all: Vec<f64> = steps.iter().map(|s| s.entropy).collect();
    CategoryEntropyMeans {
        categories,
        overall: mean(&all),
        steps: steps.len(),
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn score_all(
    provider: &dyn LogitProvider,
    profile: &VocabularyProfile,
    sampling: &SamplingConfig,
    samples: &[ScoredSample],
) -> Result<Vec<StepScore>, MetricsError> {
    let mut steps = Vec::new();
    for sample in samples {
        steps.extend(score_steps(provider, profile, sampling, sample)?);
    }
    Ok(steps)
}

pub fn category_entropy_means(
    provider: &dyn LogitProvider,
    profile: &VocabularyProfile,
    sampling: &SamplingConfig,
    samples: &[ScoredSample],
) -> Result<CategoryEntropyMeans, MetricsError> {
    Ok(entropy_means_from_trace(&score_all(
        provider, profile, sampling, samples,
    )?))
}

/// Which tokens an entropy threshold selects, and how many of those are
/// syntax tokens.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStats {
    pub threshold: f64,
    pub total: usize,
    pub selected: usize,
    pub selected_pct: f64,
    pub syntax_selected: usize,
    /// Share of selected tokens that are syntax tokens, in percent.
    pub syntax_pct_of_selected: f64,
    pub by_category: CategoryCounts,
}

pub fn selection_stats_from_trace(steps: &[StepScore], threshold: f64) -> SelectionStats {
    let mut by_category = CategoryCounts::default();
    for s in steps.iter().filter(|s| s.entropy > threshold) {
        by_category.add(s.category);
    }
    let selected = by_category.total();
    let syntax_selected = by_category.syntax_total();
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    SelectionStats {
        threshold,
        total: steps.len(),
        selected,
        selected_pct: pct(selected, steps.len()),
        syntax_selected,
        syntax_pct_of_selected: pct(syntax_selected, selected),
        by_category,
    }
}

pub fn sweet_selection_stats(
    provider: &dyn LogitProvider,
    profile: &VocabularyProfile,
    sampling: &SamplingConfig,
    samples: &[ScoredSample],
    threshold: f64,
) -> Result<SelectionStats, MetricsError> {
    let steps = score_all(provider, profile, sampling, samples)?;
    Ok(selection_stats_from_trace(&steps, threshold))
}

/// Selection statistics for several thresholds from one scoring pass.
pub fn sweet_selection_table(
    provider: &dyn LogitProvider,
    profile: &VocabularyProfile,
    sampling: &SamplingConfig,
    samples: &[ScoredSample],
    thresholds: &[f64],
) -> Result<Vec<SelectionStats>, MetricsError> {
    let steps = score_all(provider, profile, sampling, samples)?;
    Ok(thresholds
        .iter()
        .map(|&h| selection_stats_from_trace(&steps, h))
        .collect())
}
