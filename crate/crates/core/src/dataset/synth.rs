//! Deterministic stroke-glyph datasets.
//!
//! Each class is a fixed set of 3-6 line segments. The class shapes depend only
//! on the class index, so packs generated with different seeds share classes and
//! can serve as train and held-out splits. The seed drives the per-sample
//! distortion: translation, rotation, stroke width, endpoint wobble and noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{DatasetPack, TagCode, IMAGE_PIXELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::rng::RngStream;

const TEMPLATE_SEED: u64 = 0x4843_4352_5459_5045;
const MAX_SHIFT: f64 = 6.0;
const MAX_ROTATION_DEG: f64 = 10.0;
const NOISE_STD: f64 = 0.03;

#[derive(Clone, Copy)]
struct Segment {
    a: (f64, f64),
    b: (f64, f64),
}

/// Synthetic tag codes walk the GB2312 level-1 block starting at 0xB0A1.
pub fn synth_tag_code(class: usize) -> TagCode {
    TagCode([0xB0 + (class / 94) as u8, 0xA1 + (class % 94) as u8])
}

fn class_template(class: usize) -> Vec<Segment> {
    let mut rng = RngStream::fork(TEMPLATE_SEED, class as u64);
    let strokes = 3 + rng.index(4);
    let mut out = Vec::with_capacity(strokes);
    while out.len() < strokes {
        let a = (rng.uniform_in(24.0, 104.0), rng.uniform_in(24.0, 104.0));
        let b = (rng.uniform_in(24.0, 104.0), rng.uniform_in(24.0, 104.0));
        if libm::hypot(a.0 - b.0, a.1 - b.1) >= 30.0 {
            out.push(Segment { a, b });
        }
    }
    out
}

fn distance_to_segment(p: (f64, f64), s: &Segment) -> f64 {
    let (dx, dy) = (s.b.0 - s.a.0, s.b.1 - s.a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - s.a.0) * dx + (p.1 - s.a.1) * dy) / len2).clamp(0.0, 1.0);
    libm::hypot(p.0 - (s.a.0 + t * dx), p.1 - (s.a.1 + t * dy))
}

fn render(template: &[Segment], rng: &mut RngStream, canvas: &mut [f64]) {
    let shift = (rng.uniform_in(-MAX_SHIFT, MAX_SHIFT), rng.uniform_in(-MAX_SHIFT, MAX_SHIFT));
    let angle = rng.uniform_in(-MAX_ROTATION_DEG, MAX_ROTATION_DEG).to_radians();
    let half_width = rng.uniform_in(1.5, 3.0);
    let (sin, cos) = (libm::sin(angle), libm::cos(angle));
    let center = IMAGE_SIDE as f64 / 2.0;
    let mut place = |p: (f64, f64)| {
        let wobble = (rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0));
        let (x, y) = (p.0 + wobble.0 - center, p.1 + wobble.1 - center);
        (cos * x - sin * y + center + shift.0, sin * x + cos * y + center + shift.1)
    };
    let segments: Vec<Segment> = template.iter().map(|s| Segment { a: place(s.a), b: place(s.b) }).collect();

    canvas.fill(0.0);
    let reach = half_width + 1.0;
    for s in &segments {
        let x0 = libm::floor(s.a.0.min(s.b.0) - reach).max(0.0) as usize;
        let x1 = (libm::ceil(s.a.0.max(s.b.0) + reach).max(0.0) as usize).min(IMAGE_SIDE);
        let y0 = libm::floor(s.a.1.min(s.b.1) - reach).max(0.0) as usize;
        let y1 = (libm::ceil(s.a.1.max(s.b.1) + reach).max(0.0) as usize).min(IMAGE_SIDE);
        for y in y0..y1 {
            for x in x0..x1 {
                let d = distance_to_segment((x as f64 + 0.5, y as f64 + 0.5), s);
                let v = (half_width + 0.5 - d).clamp(0.0, 1.0);
                let px = &mut canvas[y * IMAGE_SIDE + x];
                *px = px.max(v);
            }
        }
    }
    for px in canvas.iter_mut() {
        *px = (*px + NOISE_STD * rng.normal()).clamp(0.0, 1.0);
    }
}

/// `num_classes * samples_per_class` samples, class-major order.
pub fn synth_dataset(num_classes: usize, samples_per_class: usize, seed: u64) -> Result<DatasetPack> {
    if num_classes < 2 || samples_per_class < 2 {
        return Err(Error::Parameter(format!(
            "synthetic pack needs >= 2 classes and >= 2 samples per class, got {num_classes} x {samples_per_class}"
        )));
    }
    if num_classes > 94 * 39 {
        return Err(Error::Parameter(format!("at most {} synthetic classes", 94 * 39)));
    }
    let mut pack = DatasetPack::new((0..num_classes).map(synth_tag_code).collect());
    let mut rng = RngStream::new(seed);
    let mut canvas = vec![0.0; IMAGE_PIXELS];
    for class in 0..num_classes {
        let template = class_template(class);
        for _ in 0..samples_per_class {
            render(&template, &mut rng, &mut canvas);
            pack.push(class, &canvas)?;
        }
    }
    Ok(pack)
}
