use alloc::vec::Vec;

use super::{Mode, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

impl Tape {
    /// `v` for `v >= 0`, `slope * v` otherwise. The derivative at 0 is taken as 1.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::Parameter(alloc::format!("leaky slope {} outside [0, 1)", slope)));
        }
        let t = self.value(x);
        let mut zeros = 0usize;
        let data: Vec<f64> = t
            .data()
            .iter()
            .map(|&v| {
                zeros += (v == 0.0) as usize;
                if v >= 0.0 {
                    v
                } else {
                    slope * v
                }
            })
            .collect();
        let value = Tensor::new(t.shape(), data)?;
        if self.tracking() {
            let words: Vec<u64> = t
                .data()
                .chunks(64)
                .map(|c| c.iter().fold(0u64, |w, &v| (w << 1) | (v >= 0.0) as u64))
                .collect();
            for w in words {
                self.fold_pattern(w);
            }
        }
        if zeros > 0 {
            self.note_kinks(zeros);
        }
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::LeakyRelu { x, slope }, rg))
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - drop_prob)`, so
    /// evaluation mode returns `x` itself.
    pub fn dropout(&mut self, x: Var, drop_prob: f64, mode: Mode, rng: &mut RngStream) -> Result<Var> {
        if !(0.0..1.0).contains(&drop_prob) {
            return Err(Error::Parameter(alloc::format!("drop probability {} outside [0, 1)", drop_prob)));
        }
        if mode == Mode::Eval || drop_prob == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - drop_prob);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len()).map(|_| if rng.uniform() < drop_prob { 0.0 } else { keep }).collect();
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape(), data)?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Dropout { x, mask }, rg))
    }
}
