use serde::{Deserialize, Serialize};

use super::MetricsError;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Weights for correctness, detectability and imperceptibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StemWeights {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
}

impl StemWeights {
    pub fn new(alpha: f64, beta: f64, zeta: f64) -> Result<Self, MetricsError> {
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        if !(in_unit(alpha) && in_unit(beta) && in_unit(zeta))
            || (alpha + beta + zeta - 1.0).abs() > WEIGHT_TOLERANCE
        {
            return Err(MetricsError::InvalidWeights { alpha, beta, zeta });
        }
        Ok(StemWeights { alpha, beta, zeta })
    }

    pub fn equal() -> Self {
        StemWeights {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            zeta: 1.0 / 3.0,
        }
    }

    /// Equal weights followed by the three settings that put half the
    /// weight on one component.
    pub fn reference_settings() -> [StemWeights; 4] {
        let w = |alpha, beta, zeta| StemWeights { alpha, beta, zeta };
        [
            StemWeights::equal(),
            w(0.5, 0.25, 0.25),
            w(0.25, 0.5, 0.25),
            w(0.25, 0.25, 0.5),
        ]
    }

    pub fn label(&self) -> String {
        if *self == StemWeights::equal() {
            "(1/3,1/3,1/3)".to_string()
        } else {
            format!("({},{},{})", self.alpha, self.beta, self.zeta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StemComponents {
    pub correctness: f64,
    pub detectability: f64,
    pub imperceptibility: f64,
}

impl StemComponents {
    pub fn new(correctness: f64, detectability: f64, imperceptibility: f64) -> Self {
        StemComponents {
            correctness,
            detectability,
            imperceptibility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StemScore {
    pub correctness: f64,
    pub detectability: f64,
    pub imperceptibility: f64,
    pub weights: StemWeights,
    pub composite: f64,
}

pub fn stem(components: StemComponents, weights: StemWeights) -> StemScore {
    let composite = weights.alpha * components.correctness
        + weights.beta * components.detectability
        + weights.zeta * components.imperceptibility;
    StemScore {
        correctness: components.correctness,
        detectability: components.detectability,
        imperceptibility: components.imperceptibility,
        weights,
        composite,
    }
}

/// Every `(α, β, ζ)` on a lattice of spacing `step` summing to 1, ordered
/// by `α` then `β`. `step = 0.1` gives 66 settings.
pub fn weight_grid(step: f64) -> Result<Vec<StemWeights>, MetricsError> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(MetricsError::InvalidGridStep(step));
    }
    let parts = (1.0 / step).round();
    if (parts * step - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(MetricsError::InvalidGridStep(step));
    }
    let m = parts as usize;
    let mut grid = Vec::with_capacity((m + 1) * (m + 2) / 2);
    for a in 0..=m {
        for b in 0..=(m - a) {
            let z = m - a - b;
            grid.push(StemWeights {
                alpha: a as f64 / m as f64,
                beta: b as f64 / m as f64,
                zeta: z as f64 / m as f64,
            });
        }
    }
    Ok(grid)
}
