//! 2-D cross-correlation (im2col + GEMM) and 2x2 max pooling.

use alloc::vec;
use alloc::vec::Vec;

use super::{Op, Tape, Var};
use crate::error::{shape_err, Result};
use crate::linalg::{gemm, Layout};
use crate::tensor::Tensor;

#[derive(Clone, Copy)]
struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Output columns `lo..hi` whose tap `kj` lands inside the input row.
    fn valid_columns(&self, kj: usize) -> (usize, usize) {
        // ox * stride + kj >= padding  and  ox * stride + kj < width + padding
        let lo = self.padding.saturating_sub(kj).div_ceil(self.stride);
        let hi = if self.width + self.padding > kj { (self.width + self.padding - kj).div_ceil(self.stride) } else { 0 };
        (lo.min(self.out_w), hi.min(self.out_w).max(lo.min(self.out_w)))
    }

    /// Unfolds one `C x H x W` image into a `(C*kh*kw) x (out_h*out_w)` matrix.
    fn im2col(&self, image: &[f64], cols: &mut [f64]) {
        let p = self.col_cols();
        let mut r = 0;
        for c in 0..self.channels {
            let plane = &image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &mut cols[r * p..(r + 1) * p];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.padding as isize;
                        let dst = &mut row[oy * self.out_w..(oy + 1) * self.out_w];
                        if iy < 0 || iy >= self.height as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        let (lo, hi) = self.valid_columns(kj);
                        dst[..lo].fill(0.0);
                        dst[hi..].fill(0.0);
                        if self.stride == 1 {
                            let start = lo + kj - self.padding;
                            dst[lo..hi].copy_from_slice(&src[start..start + hi - lo]);
                        } else {
                            for (ox, d) in (lo..hi).zip(&mut dst[lo..hi]) {
                                *d = src[ox * self.stride + kj - self.padding];
                            }
                        }
                    }
                    r += 1;
                }
            }
        }
    }

    /// Adjoint of `im2col`: scatters-adds columns back onto the image.
    fn col2im(&self, cols: &[f64], image: &mut [f64]) {
        let p = self.col_cols();
        let mut r = 0;
        for c in 0..self.channels {
            let plane = &mut image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &cols[r * p..(r + 1) * p];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.padding as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        let (lo, hi) = self.valid_columns(kj);
                        let src = &row[oy * self.out_w..(oy + 1) * self.out_w];
                        if self.stride == 1 {
                            let start = lo + kj - self.padding;
                            for (d, v) in dst[start..start + hi - lo].iter_mut().zip(&src[lo..hi]) {
                                *d += v;
                            }
                        } else {
                            for ox in lo..hi {
                                dst[ox * self.stride + kj - self.padding] += src[ox];
                            }
                        }
                    }
                    r += 1;
                }
            }
        }
    }
}

fn geometry(input: &[usize], kernel: &[usize], bias: &[usize], stride: usize, padding: usize) -> Result<Geometry> {
    let (&[_, c, h, w], &[f, kc, kh, kw]) = (input, kernel) else {
        return Err(shape_err!("conv2d: input {:?}, kernel {:?} must be rank 4", input, kernel));
    };
    if kc != c {
        return Err(shape_err!("conv2d: kernel has {} channels, input {}", kc, c));
    }
    if bias != [f] {
        return Err(shape_err!("conv2d: bias {:?} for {} filters", bias, f));
    }
    if stride == 0 {
        return Err(shape_err!("conv2d: stride must be positive"));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(shape_err!("conv2d: kernel {}x{} larger than padded input {}x{}", kh, kw, h + 2 * padding, w + 2 * padding));
    }
    Ok(Geometry {
        channels: c,
        height: h,
        width: w,
        kh,
        kw,
        stride,
        padding,
        out_h: (h + 2 * padding - kh) / stride + 1,
        out_w: (w + 2 * padding - kw) / stride + 1,
    })
}

/// Output side length of a convolution.
pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    (size + 2 * padding).checked_sub(kernel).map(|d| d / stride + 1)
}

impl Tape {
    /// `N x C x H x W` input, `F x C x kh x kw` kernels, `F` bias. No kernel flip.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let (ti, tk, tb) = (self.value(input), self.value(kernel), self.value(bias));
        let geo = geometry(ti.shape(), tk.shape(), tb.shape(), stride, padding)?;
        let n = ti.shape()[0];
        let f = tk.shape()[0];
        let (rows, p) = (geo.col_rows(), geo.col_cols());
        let in_stride = geo.channels * geo.height * geo.width;
        let mut out = vec![0.0; n * f * p];
        let mut cols = vec![0.0; rows * p];
        for s in 0..n {
            geo.im2col(&ti.data()[s * in_stride..(s + 1) * in_stride], &mut cols);
            let dst = &mut out[s * f * p..(s + 1) * f * p];
            for (plane, b) in dst.chunks_exact_mut(p).zip(tb.data()) {
                plane.fill(*b);
            }
            gemm(1.0, tk.data(), Layout::row_major(f, rows), &cols, Layout::row_major(rows, p), 1.0, dst, Layout::row_major(f, p));
        }
        let value = Tensor::new(&[n, f, geo.out_h, geo.out_w], out)?;
        let rg = self.any_grad(&[input, kernel, bias]);
        Ok(self.push(value, Op::Conv2d { input, kernel, bias, stride, padding }, rg))
    }

    /// 2x2 max pooling with stride 2. Ties go to the first cell in row-major order.
    pub fn maxpool2d(&mut self, input: Var) -> Result<Var> {
        let t = self.value(input);
        let &[n, c, h, w] = t.shape() else {
            return Err(shape_err!("maxpool2d: input {:?} must be rank 4", t.shape()));
        };
        if h % 2 != 0 || w % 2 != 0 {
            return Err(shape_err!("maxpool2d: odd spatial size {}x{}", h, w));
        }
        let (oh, ow) = (h / 2, w / 2);
        let x = t.data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let top = base + 2 * oy * w + 2 * ox;
                    let mut best = top;
                    for cand in [top + 1, top + w, top + w + 1] {
                        if x[cand] > x[best] {
                            best = cand;
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best as u32);
                }
            }
        }
        if self.tracking() {
            for &a in &argmax {
                self.fold_pattern(a as u64);
            }
        }
        let value = Tensor::new(&[n, c, oh, ow], out)?;
        let rg = self.requires_grad(input);
        Ok(self.push(value, Op::MaxPool2d { input, argmax }, rg))
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv2d_backward(
    tape: &Tape,
    input: Var,
    kernel: Var,
    bias: Var,
    stride: usize,
    padding: usize,
    g: &[f64],
    grads: &mut [Option<Vec<f64>>],
) {
    let (ti, tk, tb) = (tape.value(input), tape.value(kernel), tape.value(bias));
    let geo = geometry(ti.shape(), tk.shape(), tb.shape(), stride, padding).expect("validated in forward");
    let n = ti.shape()[0];
    let f = tk.shape()[0];
    let (rows, p) = (geo.col_rows(), geo.col_cols());
    let in_stride = geo.channels * geo.height * geo.width;

    tape.accumulate(grads, bias, |gb| {
        for s in 0..n {
            for (o, plane) in gb.iter_mut().zip(g[s * f * p..(s + 1) * f * p].chunks_exact(p)) {
                *o += plane.iter().sum::<f64>();
            }
        }
    });

    if tape.requires_grad(kernel) {
        let mut cols = vec![0.0; rows * p];
        tape.accumulate(grads, kernel, |gk| {
            for s in 0..n {
                geo.im2col(&ti.data()[s * in_stride..(s + 1) * in_stride], &mut cols);
                let gs = &g[s * f * p..(s + 1) * f * p];
                // dK += G_s * cols^T
                gemm(1.0, gs, Layout::row_major(f, p), &cols, Layout::transposed(rows, p), 1.0, gk, Layout::row_major(f, rows));
            }
        });
    }

    if tape.requires_grad(input) {
        let mut dcols = vec![0.0; rows * p];
        tape.accumulate(grads, input, |gi| {
            for s in 0..n {
                let gs = &g[s * f * p..(s + 1) * f * p];
                // dcols = K^T * G_s
                gemm(1.0, tk.data(), Layout::transposed(f, rows), gs, Layout::row_major(f, p), 0.0, &mut dcols, Layout::row_major(rows, p));
                geo.col2im(&dcols, &mut gi[s * in_stride..(s + 1) * in_stride]);
            }
        });
    }
}
