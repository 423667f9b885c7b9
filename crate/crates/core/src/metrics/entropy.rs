use serde::{Deserialize, Serialize};

use crate::token::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(probs: &ProbVector) -> f64 {
    -probs
        .values()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

pub fn entropy_in(probs: &ProbVector, base: LogBase) -> f64 {
    match base {
        LogBase::Nats => entropy(probs),
        LogBase::Bits => entropy(probs) / std::f64::consts::LN_2,
    }
}
