use alloc::vec;
use alloc::vec::Vec;

use super::{Op, Tape, Var};
use crate::error::{shape_err, Result};
use crate::linalg::{gemm, Layout};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Square,
    Scale(f64),
}

impl Tape {
    pub fn elementwise(&mut self, kind: Elementwise, a: Var, b: Option<Var>) -> Result<Var> {
        match (kind, b) {
            (Elementwise::Add | Elementwise::Sub | Elementwise::Mul, Some(b)) => self.binary(kind, a, b),
            (Elementwise::Add | Elementwise::Sub | Elementwise::Mul, None) => {
                Err(shape_err!("{:?} needs two operands", kind))
            }
            (Elementwise::Square, None) => Ok(self.square(a)),
            (Elementwise::Scale(c), None) => Ok(self.scale(a, c)),
            (_, Some(_)) => Err(shape_err!("{:?} takes one operand", kind)),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Elementwise::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Elementwise::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Elementwise::Mul, a, b)
    }

    fn binary(&mut self, kind: Elementwise, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err!("{:?}: shapes {:?} and {:?} differ", kind, ta.shape(), tb.shape()));
        }
        let f: fn(f64, f64) -> f64 = match kind {
            Elementwise::Add => |x, y| x + y,
            Elementwise::Sub => |x, y| x - y,
            _ => |x, y| x * y,
        };
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape(), data)?;
        let op = match kind {
            Elementwise::Add => Op::Add(a, b),
            Elementwise::Sub => Op::Sub(a, b),
            _ => Op::Mul(a, b),
        };
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| x * x).collect();
        let value = Tensor::new(t.shape(), data).expect("same shape");
        let rg = self.requires_grad(a);
        self.push(value, Op::Square(a), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| c * x).collect();
        let value = Tensor::new(t.shape(), data).expect("same shape");
        let rg = self.requires_grad(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    /// `m x k` times `k x n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k, n) = match (ta.shape(), tb.shape()) {
            (&[m, k], &[k2, n]) if k == k2 => (m, k, n),
            (sa, sb) => return Err(shape_err!("matmul: {:?} x {:?}", sa, sb)),
        };
        let mut out = vec![0.0; m * n];
        gemm(1.0, ta.data(), Layout::row_major(m, k), tb.data(), Layout::row_major(k, n), 0.0, &mut out, Layout::row_major(m, n));
        let value = Tensor::new(&[m, n], out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Adds a length-`n` bias to every row of an `m x n` matrix.
    pub fn bias_add(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let n = match tx.shape() {
            &[_, n] if tb.shape() == [n] => n,
            _ => return Err(shape_err!("bias_add: {:?} + {:?}", tx.shape(), tb.shape())),
        };
        let mut data = tx.data().to_vec();
        for row in data.chunks_exact_mut(n) {
            for (v, b) in row.iter_mut().zip(tb.data()) {
                *v += b;
            }
        }
        let value = Tensor::new(tx.shape(), data)?;
        let rg = self.any_grad(&[x, bias]);
        Ok(self.push(value, Op::BiasAdd(x, bias), rg))
    }

    /// `x * w + b` with `x: m x k`, `w: k x n`, `b: n`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let y = self.matmul(x, weight)?;
        self.bias_add(y, bias)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if t.len() != shape.iter().product::<usize>() {
            return Err(shape_err!("cannot reshape {:?} to {:?}", t.shape(), shape));
        }
        let value = Tensor::new(shape, t.data().to_vec())?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        self.reduce(x, axes, false)
    }

    pub fn mean(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        self.reduce(x, axes, true)
    }

    /// Sum over every axis, giving a one-element tensor.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let axes: Vec<usize> = (0..self.value(x).rank()).collect();
        self.reduce(x, &axes, false).expect("all axes are valid")
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let axes: Vec<usize> = (0..self.value(x).rank()).collect();
        self.reduce(x, &axes, true).expect("all axes are valid")
    }

    fn reduce(&mut self, x: Var, axes: &[usize], mean: bool) -> Result<Var> {
        let t = self.value(x);
        let shape = t.shape();
        let rank = shape.len();
        let mut reduced = vec![false; rank];
        for &a in axes {
            if a >= rank || reduced[a] {
                return Err(shape_err!("invalid reduction axes {:?} for rank {}", axes, rank));
            }
            reduced[a] = true;
        }
        let mut out_shape: Vec<usize> =
            shape.iter().zip(&reduced).filter(|(_, &r)| !r).map(|(&d, _)| d).collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let count: usize = shape.iter().zip(&reduced).filter(|(_, &r)| r).map(|(&d, _)| d).product();

        // out index for every input element, walking the input in row-major order
        let mut map = Vec::with_capacity(t.len());
        let mut coord = vec![0usize; rank];
        for _ in 0..t.len() {
            let mut j = 0;
            for ax in 0..rank {
                if !reduced[ax] {
                    j = j * shape[ax] + coord[ax];
                }
            }
            map.push(j);
            for ax in (0..rank).rev() {
                coord[ax] += 1;
                if coord[ax] < shape[ax] {
                    break;
                }
                coord[ax] = 0;
            }
        }
        let mut out = vec![0.0; out_shape.iter().product()];
        for (v, &j) in t.data().iter().zip(&map) {
            out[j] += v;
        }
        let factor = if mean { 1.0 / count as f64 } else { 1.0 };
        if mean {
            out.iter_mut().for_each(|v| *v *= factor);
        }
        let value = Tensor::new(&out_shape, out)?;
        let rg = self.requires_grad(x);
        Ok(self.push(value, Op::Reduce { x, map, factor }, rg))
    }
}

pub(super) fn matmul_backward(tape: &Tape, a: Var, b: Var, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let (ta, tb) = (tape.value(a), tape.value(b));
    let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
    // dA = G * B^T
    tape.accumulate(grads, a, |ga| {
        gemm(1.0, g, Layout::row_major(m, n), tb.data(), Layout::transposed(k, n), 1.0, ga, Layout::row_major(m, k))
    });
    // dB = A^T * G
    tape.accumulate(grads, b, |gb| {
        gemm(1.0, ta.data(), Layout::transposed(m, k), g, Layout::row_major(m, n), 1.0, gb, Layout::row_major(k, n))
    });
}

pub(super) fn bias_add_backward(tape: &Tape, x: Var, b: Var, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    tape.accumulate(grads, x, |gx| super::axpy(gx, 1.0, g));
    let n = tape.value(b).len();
    tape.accumulate(grads, b, |gb| {
        for row in g.chunks_exact(n) {
            super::axpy(gb, 1.0, row);
        }
    });
}
