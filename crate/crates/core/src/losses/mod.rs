//! Classification and similarity-ranking objectives.
//!
//! [`info`] has the plain information-theoretic quantities on probability
//! vectors. The tape-recorded losses below are what training differentiates:
//! softmax cross-entropy on logits, and two intra-class similarity terms on
//! feature vectors (mean pair distance, average per-class variance).

mod info;

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Op, Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::sampler::BatchStructure;
use crate::tensor::Tensor;

pub use info::{binary_cross_entropy, entropy, kl_divergence, ProbabilityVector, BCE_EPSILON};

/// Pairs closer than this get a zero subgradient from the distance term.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    SoftmaxOnly,
    SoftmaxPlusEuclidean,
    SoftmaxPlusVariance,
}

impl LossKind {
    /// Model letter used on the command line and in reports.
    pub fn letter(self) -> char {
        match self {
            LossKind::SoftmaxOnly => 'a',
            LossKind::SoftmaxPlusEuclidean => 'b',
            LossKind::SoftmaxPlusVariance => 'c',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_lowercase() {
            'a' => Some(LossKind::SoftmaxOnly),
            'b' => Some(LossKind::SoftmaxPlusEuclidean),
            'c' => Some(LossKind::SoftmaxPlusVariance),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossVariant {
    pub kind: LossKind,
    /// Weight on the similarity term.
    pub lambda: f64,
}

impl LossVariant {
    pub fn new(kind: LossKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { kind, lambda })
    }

    pub fn softmax_only() -> Self {
        Self { kind: LossKind::SoftmaxOnly, lambda: 1.0 }
    }

    pub fn euclidean() -> Self {
        Self { kind: LossKind::SoftmaxPlusEuclidean, lambda: 1.0 }
    }

    pub fn variance() -> Self {
        Self { kind: LossKind::SoftmaxPlusVariance, lambda: 1.0 }
    }
}

/// Scalar nodes produced by [`combined_loss`].
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub cross_entropy: Var,
    pub similarity: Option<Var>,
}

/// Mean softmax cross-entropy of `m x k` logits against class indices.
pub fn softmax_cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let t = tape.value(logits);
    let &[m, k] = t.shape() else {
        return Err(shape_err!("logits must be m x k, got {:?}", t.shape()));
    };
    if labels.len() != m {
        return Err(shape_err!("{} labels for {} rows", labels.len(), m));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Validation(format!("label {bad} out of range for {k} classes")));
    }
    let mut probs = Vec::with_capacity(m * k);
    let mut total = 0.0;
    for (row, &y) in t.data().chunks_exact(k).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|z| libm::exp(z - max)).sum::<f64>());
        total += lse - row[y];
        probs.extend(row.iter().map(|z| libm::exp(z - lse)));
    }
    let value = Tensor::scalar(total / m as f64);
    let rg = tape.requires_grad(logits);
    Ok(tape.push(value, Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs }, rg))
}

pub(crate) fn softmax_cross_entropy_backward(probs: &[f64], labels: &[usize], k: usize, g: f64, out: &mut [f64]) {
    let scale = g / labels.len() as f64;
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..k {
            let onehot = if j == y { 1.0 } else { 0.0 };
            out[i * k + j] += scale * (probs[i * k + j] - onehot);
        }
    }
}

/// Mean Euclidean distance between rows `2i` and `2i + 1`.
pub fn euclidean_pair_loss(tape: &mut Tape, features: Var, structure: &BatchStructure) -> Result<Var> {
    let t = tape.value(features);
    let &[m, d] = t.shape() else {
        return Err(shape_err!("features must be m x d, got {:?}", t.shape()));
    };
    let pairs = match *structure {
        BatchStructure::Pairs { classes_per_batch } => classes_per_batch,
        _ => return Err(Error::Structure(format!("euclidean loss needs a pairs batch, got {structure:?}"))),
    };
    if m % 2 != 0 || m != 2 * pairs {
        return Err(Error::Structure(format!("{m} feature rows for {pairs} pairs")));
    }
    let x = t.data();
    let dists: Vec<f64> = (0..pairs)
        .map(|p| {
            let (a, b) = (&x[2 * p * d..(2 * p + 1) * d], &x[(2 * p + 1) * d..(2 * p + 2) * d]);
            libm::sqrt(a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum())
        })
        .collect();
    let value = Tensor::scalar(dists.iter().sum::<f64>() / pairs as f64);
    let rg = tape.requires_grad(features);
    Ok(tape.push(value, Op::EuclideanPairs { features, dists }, rg))
}

pub(crate) fn euclidean_pairs_backward(x: &Tensor, dists: &[f64], g: f64, out: &mut [f64]) {
    let d = x.shape()[1];
    let scale = g / dists.len() as f64;
    for (p, &dist) in dists.iter().enumerate() {
        if dist < DISTANCE_FLOOR {
            continue;
        }
        let (i, j) = (2 * p * d, (2 * p + 1) * d);
        for c in 0..d {
            let diff = scale * (x.data()[i + c] - x.data()[j + c]) / dist;
            out[i + c] += diff;
            out[j + c] -= diff;
        }
    }
}

/// Population variance per feature within each contiguous class block,
/// averaged over features and blocks.
pub fn variance_loss(tape: &mut Tape, features: Var, structure: &BatchStructure) -> Result<Var> {
    let t = tape.value(features);
    let &[m, d] = t.shape() else {
        return Err(shape_err!("features must be m x d, got {:?}", t.shape()));
    };
    let (blocks, per_block) = match *structure {
        BatchStructure::Groups { classes_per_batch, samples_per_class } => (classes_per_batch, samples_per_class),
        _ => return Err(Error::Structure(format!("variance loss needs a groups batch, got {structure:?}"))),
    };
    if m != blocks * per_block {
        return Err(Error::Structure(format!("{m} feature rows for {blocks} blocks of {per_block}")));
    }
    let x = t.data();
    let mut total = 0.0;
    for b in 0..blocks {
        let block = &x[b * per_block * d..(b + 1) * per_block * d];
        let mean = column_means(block, d);
        for row in block.chunks_exact(d) {
            total += row.iter().zip(&mean).map(|(v, mu)| (v - mu) * (v - mu)).sum::<f64>();
        }
    }
    let value = Tensor::scalar(total / (per_block * blocks * d) as f64);
    let rg = tape.requires_grad(features);
    Ok(tape.push(value, Op::BlockVariance { features, blocks, per_block }, rg))
}

pub(crate) fn block_variance_backward(x: &Tensor, blocks: usize, per_block: usize, g: f64, out: &mut [f64]) {
    let d = x.shape()[1];
    // d/dx_i of (1/s) sum (x - mu)^2 is (2/s)(x_i - mu); the mean's own dependence cancels
    let scale = 2.0 * g / (per_block * blocks * d) as f64;
    for b in 0..blocks {
        let range = b * per_block * d..(b + 1) * per_block * d;
        let mean = column_means(&x.data()[range.clone()], d);
        for (o, (v, mu)) in out[range.clone()].iter_mut().zip(x.data()[range].iter().zip(mean.iter().cycle())) {
            *o += scale * (v - mu);
        }
    }
}

fn column_means(block: &[f64], d: usize) -> Vec<f64> {
    let rows = block.len() / d;
    let mut mean = alloc::vec![0.0; d];
    for row in block.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    mean
}

/// Cross-entropy on `logits`, plus `lambda` times the variant's similarity term on `features`.
pub fn combined_loss(
    tape: &mut Tape,
    variant: &LossVariant,
    logits: Var,
    features: Var,
    labels: &[usize],
    structure: &BatchStructure,
) -> Result<LossTerms> {
    let cross_entropy = softmax_cross_entropy(tape, logits, labels)?;
    let similarity = match variant.kind {
        LossKind::SoftmaxOnly => None,
        LossKind::SoftmaxPlusEuclidean => Some(euclidean_pair_loss(tape, features, structure)?),
        LossKind::SoftmaxPlusVariance => Some(variance_loss(tape, features, structure)?),
    };
    let total = match similarity {
        None => cross_entropy,
        Some(sim) => {
            let weighted = tape.scale(sim, variant.lambda);
            tape.add(cross_entropy, weighted)?
        }
    };
    Ok(LossTerms { total, cross_entropy, similarity })
}
