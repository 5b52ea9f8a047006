//! Randomized gradient checks for every differentiable operation and for the
//! tiny end-to-end network under all three loss variants.

use alloc::string::String;
use alloc::vec::Vec;

use super::{grad_check_many, GradCheckReport, DEFAULT_STEP};
use crate::autodiff::{Mode, Tape, Var};
use crate::error::Result;
use crate::losses::{self, LossKind, LossVariant};
use crate::model::{build_model, forward, ModelConfig};
use crate::rng::RngStream;
use crate::sampler::BatchStructure;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteEntry {
    pub name: String,
    pub trials: usize,
    pub report: GradCheckReport,
}

fn random(shape: &[usize], rng: &mut RngStream, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform_in(lo, hi)).collect()).expect("shape matches")
}

/// Values bounded away from zero so a step of `h` never crosses a kink.
fn away_from_zero(shape: &[usize], rng: &mut RngStream) -> Tensor {
    let n = shape.iter().product();
    let values = (0..n)
        .map(|_| {
            let m = rng.uniform_in(0.1, 2.0);
            if rng.uniform() < 0.5 {
                -m
            } else {
                m
            }
        })
        .collect();
    Tensor::new(shape, values).expect("shape matches")
}

/// Contracts an arbitrary output with fixed random weights so the upstream
/// gradient is not all ones.
fn weighted_sum(tape: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(y).to_vec();
    let w = tape.constant(random(&shape, &mut RngStream::new(seed), -1.0, 1.0));
    let p = tape.mul(y, w)?;
    Ok(tape.sum_all(p))
}

type Case = fn(&mut RngStream) -> (Vec<Tensor>, fn(&mut Tape, &[Var]) -> Result<Var>);

fn op_cases() -> Vec<(&'static str, Case)> {
    let mut v: Vec<(&'static str, Case)> = Vec::new();
    v.push(("add", |r| {
        (alloc::vec![random(&[3, 4], r, -2.0, 2.0), random(&[3, 4], r, -2.0, 2.0)], |t, x| {
            let y = t.add(x[0], x[1])?;
            weighted_sum(t, y, 1)
        })
    }));
    v.push(("sub", |r| {
        (alloc::vec![random(&[3, 4], r, -2.0, 2.0), random(&[3, 4], r, -2.0, 2.0)], |t, x| {
            let y = t.sub(x[0], x[1])?;
            weighted_sum(t, y, 2)
        })
    }));
    v.push(("mul", |r| {
        (alloc::vec![random(&[3, 4], r, -2.0, 2.0), random(&[3, 4], r, -2.0, 2.0)], |t, x| {
            let y = t.mul(x[0], x[1])?;
            weighted_sum(t, y, 3)
        })
    }));
    v.push(("square", |r| {
        (alloc::vec![random(&[5], r, -2.0, 2.0)], |t, x| {
            let y = t.square(x[0]);
            weighted_sum(t, y, 4)
        })
    }));
    v.push(("scale", |r| {
        (alloc::vec![random(&[5], r, -2.0, 2.0)], |t, x| {
            let y = t.scale(x[0], -1.75);
            weighted_sum(t, y, 5)
        })
    }));
    v.push(("matmul", |r| {
        (alloc::vec![random(&[3, 4], r, -1.0, 1.0), random(&[4, 2], r, -1.0, 1.0)], |t, x| {
            let y = t.matmul(x[0], x[1])?;
            weighted_sum(t, y, 6)
        })
    }));
    v.push(("linear", |r| {
        (
            alloc::vec![random(&[3, 4], r, -1.0, 1.0), random(&[4, 2], r, -1.0, 1.0), random(&[2], r, -1.0, 1.0)],
            |t, x| {
                let y = t.linear(x[0], x[1], x[2])?;
                weighted_sum(t, y, 7)
            },
        )
    }));
    v.push(("conv2d", |r| {
        (
            alloc::vec![random(&[2, 2, 5, 5], r, -1.0, 1.0), random(&[3, 2, 3, 3], r, -1.0, 1.0), random(&[3], r, -1.0, 1.0)],
            |t, x| {
                let y = t.conv2d(x[0], x[1], x[2], 1, 1)?;
                weighted_sum(t, y, 8)
            },
        )
    }));
    v.push(("conv2d_strided", |r| {
        (
            alloc::vec![random(&[1, 2, 6, 5], r, -1.0, 1.0), random(&[2, 2, 2, 3], r, -1.0, 1.0), random(&[2], r, -1.0, 1.0)],
            |t, x| {
                let y = t.conv2d(x[0], x[1], x[2], 2, 0)?;
                weighted_sum(t, y, 9)
            },
        )
    }));
    v.push(("maxpool2d", |r| {
        (alloc::vec![random(&[2, 2, 4, 6], r, -2.0, 2.0)], |t, x| {
            let y = t.maxpool2d(x[0])?;
            weighted_sum(t, y, 10)
        })
    }));
    v.push(("leaky_relu", |r| {
        (alloc::vec![away_from_zero(&[4, 5], r)], |t, x| {
            let y = t.leaky_relu(x[0], 0.01)?;
            weighted_sum(t, y, 11)
        })
    }));
    v.push(("dropout", |r| {
        (alloc::vec![random(&[4, 5], r, -2.0, 2.0)], |t, x| {
            // same mask on every evaluation
            let y = t.dropout(x[0], 0.25, Mode::Train, &mut RngStream::new(99))?;
            weighted_sum(t, y, 12)
        })
    }));
    v.push(("sum_axis", |r| {
        (alloc::vec![random(&[2, 3, 4], r, -2.0, 2.0)], |t, x| {
            let y = t.sum(x[0], &[1])?;
            weighted_sum(t, y, 13)
        })
    }));
    v.push(("mean_axes", |r| {
        (alloc::vec![random(&[2, 3, 4], r, -2.0, 2.0)], |t, x| {
            let y = t.mean(x[0], &[0, 2])?;
            weighted_sum(t, y, 14)
        })
    }));
    v.push(("reshape", |r| {
        (alloc::vec![random(&[2, 6], r, -2.0, 2.0)], |t, x| {
            let y = t.reshape(x[0], &[3, 4])?;
            weighted_sum(t, y, 15)
        })
    }));
    v.push(("softmax_cross_entropy", |r| {
        (alloc::vec![random(&[4, 5], r, -3.0, 3.0)], |t, x| {
            losses::softmax_cross_entropy(t, x[0], &[0, 3, 4, 1])
        })
    }));
    v.push(("euclidean_pair_loss", |r| {
        (alloc::vec![random(&[6, 4], r, -2.0, 2.0)], |t, x| {
            losses::euclidean_pair_loss(t, x[0], &BatchStructure::Pairs { classes_per_batch: 3 })
        })
    }));
    v.push(("variance_loss", |r| {
        (alloc::vec![random(&[6, 4], r, -2.0, 2.0)], |t, x| {
            losses::variance_loss(t, x[0], &BatchStructure::Groups { classes_per_batch: 2, samples_per_class: 3 })
        })
    }));
    v.push(("combined_loss", |r| {
        (alloc::vec![random(&[4, 3], r, -2.0, 2.0), random(&[4, 5], r, -2.0, 2.0)], |t, x| {
            let variant = LossVariant { kind: LossKind::SoftmaxPlusEuclidean, lambda: 0.7 };
            let s = BatchStructure::Pairs { classes_per_batch: 2 };
            Ok(losses::combined_loss(t, &variant, x[0], x[1], &[1, 1, 2, 2], &s)?.total)
        })
    }));
    v
}

/// Runs every op case `trials` times with fresh random inputs.
pub fn op_suite(trials: usize, seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut rng = RngStream::new(seed);
    let mut out = Vec::new();
    for (name, case) in op_cases() {
        let mut report = GradCheckReport::default();
        for _ in 0..trials {
            let (inputs, f) = case(&mut rng);
            report.merge(&grad_check_many(f, &inputs, DEFAULT_STEP)?);
        }
        out.push(SuiteEntry { name: name.into(), trials, report });
    }
    Ok(out)
}

/// Tiny network (16x16 input, channels [2, 2], one hidden layer of 8, 3 classes)
/// with dropout active on a fixed mask, checked with respect to every parameter.
pub fn model_trial(kind: LossKind, rng: &mut RngStream, h: f64) -> Result<GradCheckReport> {
    let config = ModelConfig::tiny(3);
    let params = build_model(&config, rng)?;
    let (labels, structure): (Vec<usize>, BatchStructure) = match kind {
        LossKind::SoftmaxOnly => ((0..6).map(|_| rng.index(3)).collect(), BatchStructure::Uniform),
        LossKind::SoftmaxPlusEuclidean => (alloc::vec![0, 0, 2, 2, 1, 1], BatchStructure::Pairs { classes_per_batch: 3 }),
        LossKind::SoftmaxPlusVariance => {
            (alloc::vec![1, 1, 1, 0, 0, 0], BatchStructure::Groups { classes_per_batch: 2, samples_per_class: 3 })
        }
    };
    let images = random(&[labels.len(), 1, 16, 16], rng, 0.0, 1.0);
    let dropout_seed = rng.index(1 << 30) as u64;
    let variant = LossVariant { kind, lambda: 0.5 };
    let inputs: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    grad_check_many(
        |tape, vars| {
            let x = tape.constant(images.clone());
            let out = forward(tape, &config, vars, x, Mode::Train, &mut RngStream::new(dropout_seed))?;
            Ok(losses::combined_loss(tape, &variant, out.logits, out.features, &labels, &structure)?.total)
        },
        &inputs,
        h,
    )
}

pub fn model_suite(trials: usize, seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for kind in [LossKind::SoftmaxOnly, LossKind::SoftmaxPlusEuclidean, LossKind::SoftmaxPlusVariance] {
        let mut rng = RngStream::fork(seed, kind.letter() as u64);
        let mut report = GradCheckReport::default();
        for _ in 0..trials {
            report.merge(&model_trial(kind, &mut rng, DEFAULT_STEP)?);
        }
        out.push(SuiteEntry { name: alloc::format!("tiny_model_{}", kind.letter()), trials, report });
    }
    Ok(out)
}
