//! Crop, scale and pad a raw GNT bitmap into a 128x128 ink-high image.

use alloc::vec;
use alloc::vec::Vec;

use super::{GntRecord, IMAGE_SIDE};
use crate::error::{Error, Result};

/// Longest side of the scaled glyph.
pub const TARGET_EXTENT: usize = 120;
/// Blank border left around a glyph whose longest side is `TARGET_EXTENT`.
pub const CANVAS_MARGIN: usize = (IMAGE_SIDE - TARGET_EXTENT) / 2;

/// Inverts to ink-high (`(255 - v) / 255`), crops to the ink bounding box,
/// scales the longer side to 120 pixels with a bilinear (triangle) filter and
/// centers the result on a zero 128x128 canvas. Odd margins put the extra
/// pixel on the bottom/right.
pub fn preprocess(record: &GntRecord) -> Result<Vec<f64>> {
    record.validate()?;
    let (w, h) = (record.width as usize, record.height as usize);
    let ink: Vec<f64> = record.bitmap.iter().map(|&v| (255 - v) as f64 / 255.0).collect();

    let (mut top, mut bottom, mut left, mut right) = (h, 0, w, 0);
    for r in 0..h {
        for c in 0..w {
            if ink[r * w + c] > 0.0 {
                top = top.min(r);
                bottom = bottom.max(r);
                left = left.min(c);
                right = right.max(c);
            }
        }
    }
    if top > bottom {
        return Err(Error::Degenerate(alloc::format!(
            "{}x{} bitmap for tag {} has no ink",
            w,
            h,
            record.tag_code
        )));
    }
    let (crop_h, crop_w) = (bottom - top + 1, right - left + 1);
    let crop: Vec<f64> = (top..=bottom).flat_map(|r| ink[r * w + left..=r * w + right].iter().copied()).collect();

    let longest = crop_h.max(crop_w);
    let scaled_len = |n: usize| {
        if n == longest {
            TARGET_EXTENT
        } else {
            (libm::round(n as f64 * TARGET_EXTENT as f64 / longest as f64) as usize).clamp(1, TARGET_EXTENT)
        }
    };
    let (new_h, new_w) = (scaled_len(crop_h), scaled_len(crop_w));
    let scaled = resize(&crop, crop_h, crop_w, new_h, new_w);

    let pad_top = (IMAGE_SIDE - new_h) / 2;
    let pad_left = (IMAGE_SIDE - new_w) / 2;
    let mut out = vec![0.0; IMAGE_SIDE * IMAGE_SIDE];
    for r in 0..new_h {
        let dst = &mut out[(pad_top + r) * IMAGE_SIDE + pad_left..][..new_w];
        for (d, s) in dst.iter_mut().zip(&scaled[r * new_w..(r + 1) * new_w]) {
            *d = s.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Per output index: first input index and normalized weights.
fn triangle_weights(in_len: usize, out_len: usize) -> Vec<(usize, Vec<f64>)> {
    let ratio = in_len as f64 / out_len as f64;
    // widen the kernel when shrinking so every input pixel reaches some output
    let support = ratio.max(1.0);
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * ratio;
            let lo = libm::floor(center - support).max(0.0) as usize;
            let hi = (libm::ceil(center + support) as usize).min(in_len);
            let mut weights: Vec<f64> = (lo..hi)
                .map(|i| (1.0 - libm::fabs(i as f64 + 0.5 - center) / support).max(0.0))
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            (lo, weights)
        })
        .collect()
}

fn resize(src: &[f64], h: usize, w: usize, new_h: usize, new_w: usize) -> Vec<f64> {
    let cols = triangle_weights(w, new_w);
    let rows = triangle_weights(h, new_h);
    let mut horizontal = vec![0.0; h * new_w];
    for r in 0..h {
        let line = &src[r * w..(r + 1) * w];
        for (o, (start, weights)) in cols.iter().enumerate() {
            horizontal[r * new_w + o] = weights.iter().zip(&line[*start..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; new_h * new_w];
    for (o, (start, weights)) in rows.iter().enumerate() {
        let dst = &mut out[o * new_w..(o + 1) * new_w];
        for (k, wt) in weights.iter().enumerate() {
            let line = &horizontal[(start + k) * new_w..(start + k + 1) * new_w];
            for (d, v) in dst.iter_mut().zip(line) {
                *d += wt * v;
            }
        }
    }
    out
}
