//! Handwriting samples: raw GNT records, the 128x128 preprocessed form and the
//! in-memory dataset pack.

mod preprocess;
mod synth;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use preprocess::{preprocess, CANVAS_MARGIN, TARGET_EXTENT};
pub use synth::{synth_dataset, synth_tag_code};

pub const IMAGE_SIDE: usize = 128;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// Bytes in a GNT record header (size, tag, width, height).
pub const GNT_HEADER_LEN: usize = 10;

/// Two-byte character label as stored in GNT files (GB code, high byte first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagCode(pub [u8; 2]);

impl TagCode {
    pub fn from_u16(code: u16) -> Self {
        Self(code.to_be_bytes())
    }

    pub fn to_u16(self) -> u16 {
        u16::from_be_bytes(self.0)
    }
}

impl core::fmt::Display for TagCode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:04X}", self.to_u16())
    }
}

/// One isolated character image. 0 is black ink, 255 white background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GntRecord {
    pub tag_code: TagCode,
    pub width: u16,
    pub height: u16,
    pub bitmap: Vec<u8>,
}

impl GntRecord {
    pub fn new(tag_code: TagCode, width: u16, height: u16, bitmap: Vec<u8>) -> Result<Self> {
        let record = Self { tag_code, width, height, bitmap };
        record.validate()?;
        Ok(record)
    }

    /// Byte count of the whole record as written to a GNT stream.
    pub fn sample_size(&self) -> u32 {
        (GNT_HEADER_LEN + self.width as usize * self.height as usize) as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!("zero-sized bitmap {}x{}", self.width, self.height)));
        }
        let expected = self.width as usize * self.height as usize;
        if self.bitmap.len() != expected {
            return Err(Error::Validation(format!(
                "bitmap has {} bytes, {}x{} needs {}",
                self.bitmap.len(),
                self.width,
                self.height,
                expected
            )));
        }
        Ok(())
    }

    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.bitmap[row * self.width as usize + col]
    }
}

/// A labelled 128x128 image with ink near 1 and background near 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessedSample {
    pub label: usize,
    pub image: Vec<f64>,
}

/// Pixels are stored quantized to 1/255 steps, exactly as on disk.
pub fn quantize(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
}

pub fn dequantize(q: u8) -> f64 {
    q as f64 / 255.0
}

/// Labelled 128x128 samples plus the label table that maps class index to tag code.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DatasetPack {
    label_table: Vec<TagCode>,
    labels: Vec<u32>,
    pixels: Vec<u8>,
    by_class: Vec<Vec<usize>>,
}

impl DatasetPack {
    pub fn new(label_table: Vec<TagCode>) -> Self {
        let by_class = vec![Vec::new(); label_table.len()];
        Self { label_table, labels: Vec::new(), pixels: Vec::new(), by_class }
    }

    /// Rebuilds a pack from its stored form.
    pub fn from_parts(label_table: Vec<TagCode>, labels: Vec<u32>, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != labels.len() * IMAGE_PIXELS {
            return Err(Error::Validation(format!(
                "{} pixel bytes for {} samples",
                pixels.len(),
                labels.len()
            )));
        }
        let mut pack = Self::new(label_table);
        for (i, &l) in labels.iter().enumerate() {
            pack.check_label(l as usize)?;
            pack.by_class[l as usize].push(i);
        }
        pack.labels = labels;
        pack.pixels = pixels;
        Ok(pack)
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.label_table.len() {
            return Err(Error::Validation(format!(
                "label {} but only {} classes",
                label,
                self.label_table.len()
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, label: usize, image: &[f64]) -> Result<()> {
        if image.len() != IMAGE_PIXELS {
            return Err(Error::Validation(format!("image has {} pixels, need {}", image.len(), IMAGE_PIXELS)));
        }
        if let Some(v) = image.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("pixel value {v} outside [0, 1]")));
        }
        self.check_label(label)?;
        self.by_class[label].push(self.labels.len());
        self.labels.push(label as u32);
        self.pixels.extend(image.iter().map(|&v| quantize(v)));
        Ok(())
    }

    pub fn push_sample(&mut self, sample: &PreprocessedSample) -> Result<()> {
        self.push(sample.label, &sample.image)
    }

    /// Class index for `tag`, appending it to the label table if new.
    pub fn class_for_tag(&mut self, tag: TagCode) -> usize {
        match self.label_table.iter().position(|&t| t == tag) {
            Some(c) => c,
            None => {
                self.label_table.push(tag);
                self.by_class.push(Vec::new());
                self.label_table.len() - 1
            }
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_table.len()
    }

    pub fn label_table(&self) -> &[TagCode] {
        &self.label_table
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Sample indices of one class, in pack order.
    pub fn class_samples(&self, class: usize) -> &[usize] {
        &self.by_class[class]
    }

    /// Quantized pixels of sample `i`.
    pub fn pixels(&self, i: usize) -> &[u8] {
        &self.pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn all_pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        self.pixels(i).iter().map(|&q| dequantize(q)).collect()
    }

    pub fn sample(&self, i: usize) -> PreprocessedSample {
        PreprocessedSample { label: self.label(i), image: self.image(i) }
    }

    /// Stacks samples into an `N x 1 x 128 x 128` tensor.
    pub fn batch_images(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!("sample {} out of range ({} samples)", i, self.len())));
            }
            data.extend(self.pixels(i).iter().map(|&q| dequantize(q)));
        }
        Tensor::new(&[indices.len(), 1, IMAGE_SIDE, IMAGE_SIDE], data)
    }

    /// A new pack holding the given samples in the given order, same label table.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            labels.push(self.labels[i]);
            pixels.extend_from_slice(self.pixels(i));
        }
        Self::from_parts(self.label_table.clone(), labels, pixels).expect("labels come from a valid pack")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DatasetStats {
    pub classes: usize,
    pub total: usize,
    pub min_per_class: usize,
    pub mean_per_class: f64,
    pub max_per_class: usize,
}

pub fn dataset_stats(pack: &DatasetPack) -> DatasetStats {
    if pack.num_classes() == 0 {
        return DatasetStats::default();
    }
    let counts = pack.by_class.iter().map(Vec::len);
    DatasetStats {
        classes: pack.num_classes(),
        total: pack.len(),
        min_per_class: counts.clone().min().unwrap_or(0),
        mean_per_class: pack.len() as f64 / pack.num_classes() as f64,
        max_per_class: counts.max().unwrap_or(0),
    }
}
