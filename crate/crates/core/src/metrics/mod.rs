//! Evaluation mathematics: entropy, pass@k, ROC/AUROC, perplexity,
//! imperceptibility, the weighted composite and its weight grid, and
//! per-step entropy analyses that need model access.

mod analysis;
mod entropy;
mod passk;
mod perplexity;
mod roc;
mod stem;

pub use analysis::{
    category_entropy_means, entropy_means_from_trace, score_steps, selection_stats_from_trace,
    sweet_selection_stats, sweet_selection_table, CategoryEntropyMeans, CategoryMean, ScoredSample,
    SelectionStats, StepScore,
};
pub use entropy::{entropy, entropy_in, LogBase};
pub use passk::{mean_pass_at_k, pass_at_k};
pub use perplexity::{completion_log_probs, corpus_perplexity, imperceptibility, perplexity_from_log_probs, CorpusPpl, SamplePpl};
pub use roc::{auroc, rates_at, roc_points, trapezoid_area, RocPoint, ScorePools};
pub use stem::{stem, weight_grid, StemComponents, StemScore, StemWeights};

use thiserror::Error;

use crate::model::ProviderError;
use crate::token::TokenError;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("pass@k needs 0 <= c <= n and 1 <= k <= n, got n={n}, c={c}, k={k}")]
    InvalidPassAtK { n: usize, c: usize, k: usize },
    #[error("{0} score pool is empty")]
    EmptyPool(&'static str),
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("weights ({alpha}, {beta}, {zeta}) must lie in [0, 1] and sum to 1")]
    InvalidWeights { alpha: f64, beta: f64, zeta: f64 },
    #[error("grid step {0} does not divide 1 into whole parts")]
    InvalidGridStep(f64),
    #[error("reference perplexity must be positive and finite, got {0}")]
    InvalidReferencePpl(f64),
    #[error("no samples to average")]
    NoSamples,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Token(#[from] TokenError),
}
