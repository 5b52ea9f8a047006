use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};

/// Predictions are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` before taking logs.
pub const BCE_EPSILON: f64 = 1e-12;

const SUM_TOLERANCE: f64 = 1e-9;

/// Non-negative values summing to one (within 1e-9).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("empty probability vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("probability {v} outside [0, 1]")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Validation(format!("probabilities sum to {sum}")));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(alloc::vec![1.0 / n as f64; n])
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
}

/// `-sum p log p` in the given base; zero-probability terms contribute nothing.
pub fn entropy(p: &ProbabilityVector, base: f64) -> Result<f64> {
    if !(base > 0.0) || base == 1.0 {
        return Err(Error::Parameter(format!("invalid log base {base}")));
    }
    let nats: f64 = p.values().iter().filter(|&&v| v > 0.0).map(|&v| -v * libm::log(v)).sum();
    Ok(nats / libm::log(base))
}

/// `sum p ln(p / q)` in nats.
pub fn kl_divergence(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(shape_err!("kl_divergence: lengths {} and {}", p.len(), q.len()));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.values().iter().zip(q.values()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::Domain(format!("q[{i}] = 0 where p[{i}] = {pi}")));
        }
        total += pi * libm::log(pi / qi);
    }
    Ok(total.max(0.0))
}

/// Mean logistic loss `-(1/m) sum [y ln yhat + (1 - y) ln(1 - yhat)]`.
pub fn binary_cross_entropy(labels: &[f64], predictions: &[f64]) -> Result<f64> {
    if labels.len() != predictions.len() || labels.is_empty() {
        return Err(shape_err!("binary_cross_entropy: {} labels, {} predictions", labels.len(), predictions.len()));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Validation(format!("label {y} is not 0 or 1")));
    }
    let total: f64 = labels
        .iter()
        .zip(predictions)
        .map(|(&y, &p)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p)
        })
        .sum();
    Ok(-total / labels.len() as f64)
}
