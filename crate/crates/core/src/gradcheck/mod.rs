//! Central finite-difference gradient checks against the tape's backward pass.
//!
//! Each perturbed evaluation is fingerprinted (leaky-ReLU signs and max-pool
//! argmax choices). A coordinate whose `+h` or `-h` evaluation lands on a
//! different branch straddles a non-smooth point; it is skipped and counted
//! instead of being compared.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

pub mod suite;

pub const DEFAULT_STEP: f64 = 1e-5;
const DENOMINATOR_FLOOR: f64 = 1e-8;
/// Gradients smaller than this (relative to `max(1, |f|)`) sit within a few
/// hundred ulps of central-difference noise at the default step.
pub const RESOLUTION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a kink.
    pub skipped: usize,
    /// An activation input sat exactly on a kink in the unperturbed evaluation.
    pub kink_warning: bool,
    pub max_abs_error: f64,
    /// Largest relative error among coordinates whose gradient magnitude is at
    /// least [`RESOLUTION`]` * max(1, |f|)`.
    pub max_rel_error_resolved: f64,
    /// Coordinates below that threshold.
    pub unresolved: usize,
}

impl GradCheckReport {
    pub fn merge(&mut self, other: &GradCheckReport) {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.kink_warning |= other.kink_warning;
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.max_rel_error_resolved = self.max_rel_error_resolved.max(other.max_rel_error_resolved);
        self.unresolved += other.unresolved;
    }
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(DENOMINATOR_FLOOR)
}

/// Checks `f` at `x` with step `h`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), core::slice::from_ref(x), h)
}

/// Checks `f` with respect to every coordinate of every input.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_pattern_tracking();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    tape.backward(root)?;
    let threshold = RESOLUTION * tape.value(root).item()?.abs().max(1.0);
    let base_pattern = tape.pattern();
    let mut report = GradCheckReport { kink_warning: tape.kinks() > 0, ..Default::default() };
    if report.kink_warning {
        log::warn!("gradient check evaluated at a leaky-ReLU kink; derivative 1 is used there");
    }
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v).expect("leaf gradient").to_vec()).collect();

    let eval = |perturbed: &[Tensor]| -> Result<(f64, u64)> {
        let mut tape = Tape::with_pattern_tracking();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let root = f(&mut tape, &vars)?;
        Ok((tape.value(root).item()?, tape.pattern()))
    };

    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let (plus, p_plus) = eval(&work)?;
            work[i].data_mut()[j] = orig - h;
            let (minus, p_minus) = eval(&work)?;
            work[i].data_mut()[j] = orig;
            if p_plus != base_pattern || p_minus != base_pattern {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let rel = relative_error(a, numeric);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if a.abs().max(numeric.abs()) >= threshold {
                report.max_rel_error_resolved = report.max_rel_error_resolved.max(rel);
            } else {
                report.unresolved += 1;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use alloc::vec;

    fn random(shape: &[usize], rng: &mut RngStream) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap()
    }

    #[test]
    fn sum_of_squares() {
        let mut rng = RngStream::new(5);
        for _ in 0..10 {
            let x = random(&[7], &mut rng);
            let r = grad_check(
                |t, x| {
                    let s = t.square(x);
                    Ok(t.sum_all(s))
                },
                &x,
                DEFAULT_STEP,
            )
            .unwrap();
            assert!(r.max_rel_error <= 1e-6, "{r:?}");
            assert_eq!(r.checked, 7);
        }
    }

    #[test]
    fn linear_function_is_exact_to_rounding() {
        let x = random(&[5], &mut RngStream::new(1));
        let r = grad_check(|t, x| Ok(t.sum_all(x)), &x, DEFAULT_STEP).unwrap();
        assert!(r.max_rel_error <= 1e-10, "{r:?}");
    }

    #[test]
    fn kink_is_reported() {
        let x = Tensor::new(&[3], vec![0.0, 1.0, -1.0]).unwrap();
        let r = grad_check(
            |t, x| {
                let y = t.leaky_relu(x, 0.01)?;
                Ok(t.sum_all(y))
            },
            &x,
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(r.kink_warning);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.checked, 2);
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        // matching values, mismatched derivative: relative error must blow up
        assert!(relative_error(2.0, 1.0) > 0.4);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
    }
}
