//! γ × δ sweeps and composite scores over weight settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use synmark_core::engine::{Gate, WatermarkParams};
use synmark_core::metrics::{stem, weight_grid, StemWeights};

use crate::dataset::TaskRecord;
use crate::env::Environment;
use crate::pipeline::{run_pipeline, PipelineConfig, Summary};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub gate: Gate,
    /// Weight settings scored for every row, besides the reference ones.
    pub grid_step: Option<f64>,
    pub base: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub delta: f64,
    pub pass_at_1: Option<f64>,
    pub auroc: Option<f64>,
    pub imperceptibility: Option<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeRow {
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub composite: f64,
}

pub fn validate(spec: &SweepSpec) -> Result<(), HarnessError> {
    if spec.gammas.is_empty() || spec.deltas.is_empty() {
        return Err(HarnessError::Validation("sweep lists must be non-empty".into()));
    }
    if let Some(step) = spec.grid_step {
        weight_grid(step).map_err(|e| HarnessError::Validation(e.to_string()))?;
    }
    Ok(())
}

pub fn weight_settings(spec: &SweepSpec) -> Result<Vec<StemWeights>, HarnessError> {
    let mut weights = StemWeights::reference_settings().to_vec();
    if let Some(step) = spec.grid_step {
        let grid = weight_grid(step).map_err(|e| HarnessError::Validation(e.to_string()))?;
        for w in grid {
            if !weights.contains(&w) {
                weights.push(w);
            }
        }
    }
    Ok(weights)
}

/// One pipeline run per (γ, δ), γ outer.
pub fn sweep(
    tasks: &[TaskRecord],
    env: &Environment,
    spec: &SweepSpec,
) -> Result<(Vec<SweepRow>, Vec<CompositeRow>), HarnessError> {
    validate(spec)?;
    let weights = weight_settings(spec)?;
    let mut rows = Vec::new();
    let mut composites = Vec::new();
    for &gamma in &spec.gammas {
        for &delta in &spec.deltas {
            let config = PipelineConfig {
                params: WatermarkParams {
                    gamma,
                    delta,
                    gate: spec.gate,
                    ..spec.base.params.clone()
                },
                ..spec.base.clone()
            };
            let output = run_pipeline(tasks, env, &config)?;
            let summary = output.summary;
            if let Some(c) = summary.components() {
                for &w in &weights {
                    composites.push(CompositeRow {
                        gamma,
                        delta,
                        alpha: w.alpha,
                        beta: w.beta,
                        zeta: w.zeta,
                        composite: stem(c, w).composite,
                    });
                }
            }
            rows.push(SweepRow {
                gamma,
                delta,
                pass_at_1: summary.correctness(),
                auroc: summary.auroc,
                imperceptibility: summary.imperceptibility,
                summary,
            });
        }
    }
    Ok((rows, composites))
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["gamma", "delta", "pass_at_1", "auroc", "imperceptibility"])
        .map_err(|e| csv_err(path, e))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.delta.to_string(),
            opt(r.pass_at_1),
            opt(r.auroc),
            opt(r.imperceptibility),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

pub fn write_composites_csv(path: &Path, rows: &[CompositeRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}
