//! Run settings. A TOML file can set any field; command-line flags override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use synmark_core::engine::{Gate, WatermarkParams};
use synmark_core::partition::SeedKey;
use synmark_core::token::SamplingConfig;

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    /// `toy` or `remote:<url>`.
    pub provider: String,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub gamma: f64,
    pub delta: f64,
    /// `non-syntax`, `always` or `entropy`.
    pub gate: String,
    pub entropy_threshold: f64,
    /// 0 keeps the full vocabulary.
    pub top_k: usize,
    pub temperature: f64,
    pub seed_key: u64,
    pub max_tokens: usize,
    pub z_threshold: f64,
    /// Language profile name or path; defaults to the dataset's language.
    pub language: Option<String>,
    /// Decode table for the remote provider.
    pub vocab: Option<PathBuf>,
    pub samples: usize,
    pub k: Vec<usize>,
    pub timeout_secs: f64,
    pub toy_identifiers: usize,
    pub toy_model_seed: u64,
    pub remote_timeout_secs: f64,
    pub remote_retries: u32,
    pub sweep_gammas: Vec<f64>,
    pub sweep_deltas: Vec<f64>,
    pub grid_step: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            dataset: None,
            provider: "toy".into(),
            seed: 0,
            workers: 4,
            out_dir: PathBuf::from("runs"),
            gamma: 0.5,
            delta: 1.0,
            gate: "non-syntax".into(),
            entropy_threshold: 0.9,
            top_k: 50,
            temperature: 1.0,
            seed_key: 15485863,
            max_tokens: 128,
            z_threshold: 4.0,
            language: None,
            vocab: None,
            samples: 5,
            k: vec![1, 5],
            timeout_secs: 10.0,
            toy_identifiers: 200,
            toy_model_seed: 1,
            remote_timeout_secs: 30.0,
            remote_retries: 2,
            sweep_gammas: vec![0.25, 0.5],
            sweep_deltas: vec![0.5, 1.0, 2.0],
            grid_step: 0.1,
        }
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Validation(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| HarnessError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn gate(&self) -> Result<Gate, HarnessError> {
        match self.gate.as_str() {
            "non-syntax" | "stone" => Ok(Gate::NonSyntax),
            "always" | "kgw" => Ok(Gate::Always),
            "entropy" | "sweet" => Ok(Gate::EntropyThreshold(self.entropy_threshold)),
            other => Err(HarnessError::Validation(format!(
                "unknown gate \"{other}\" (expected non-syntax, always or entropy)"
            ))),
        }
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            temperature: self.temperature,
            top_k: (self.top_k > 0).then_some(self.top_k),
        }
    }

    pub fn params(&self) -> Result<WatermarkParams, HarnessError> {
        let params = WatermarkParams {
            gamma: self.gamma,
            delta: self.delta,
            key: SeedKey(self.seed_key),
            gate: self.gate()?,
            sampling: self.sampling(),
            max_tokens: self.max_tokens,
            stop_tokens: Vec::new(),
        };
        params
            .validate()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        self.params()?;
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.k.is_empty() {
            return bad("at least one k is required".into());
        }
        if let Some(&k) = self.k.iter().find(|&&k| k == 0 || k > self.samples) {
            return bad(format!("k = {k} must lie in 1..={}", self.samples));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        if !(self.z_threshold.is_finite()) {
            return bad("z threshold must be finite".into());
        }
        Ok(())
    }
}
