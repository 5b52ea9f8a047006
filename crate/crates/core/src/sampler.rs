//! Batch construction: uniform draws, same-class pairs and same-class groups.
//!
//! Structured batches lay out each class as a contiguous block, so the
//! similarity losses find pairs and groups by position alone.

use alloc::format;
use alloc::vec::Vec;

use crate::dataset::DatasetPack;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchStructure {
    Uniform,
    Pairs { classes_per_batch: usize },
    Groups { classes_per_batch: usize, samples_per_class: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub sample_indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub structure: BatchStructure,
    /// Classes that had to be drawn with replacement because they were too small.
    pub resampled_classes: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.sample_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_indices.is_empty()
    }

    /// Checks the layout promised by `structure`.
    pub fn check_structure(&self) -> Result<()> {
        if self.labels.len() != self.sample_indices.len() {
            return Err(Error::Structure("labels and indices differ in length".into()));
        }
        let (classes, per_class) = match self.structure {
            BatchStructure::Uniform => return Ok(()),
            BatchStructure::Pairs { classes_per_batch } => (classes_per_batch, 2),
            BatchStructure::Groups { classes_per_batch, samples_per_class } => (classes_per_batch, samples_per_class),
        };
        if self.len() != classes * per_class {
            return Err(Error::Structure(format!("{} samples for {} x {}", self.len(), classes, per_class)));
        }
        let mut seen = Vec::with_capacity(classes);
        for block in self.labels.chunks_exact(per_class) {
            if block.iter().any(|&l| l != block[0]) {
                return Err(Error::Structure("mixed labels inside a class block".into()));
            }
            if seen.contains(&block[0]) {
                return Err(Error::Structure(format!("class {} appears in two blocks", block[0])));
            }
            seen.push(block[0]);
        }
        Ok(())
    }
}

/// Sampler parameters for one training run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerConfig {
    Uniform { batch_size: usize },
    Pairs { classes_per_batch: usize },
    Groups { classes_per_batch: usize, samples_per_class: usize },
}

impl SamplerConfig {
    pub fn sample(&self, pack: &DatasetPack, rng: &mut RngStream) -> Result<Batch> {
        match *self {
            SamplerConfig::Uniform { batch_size } => sample_uniform(pack, batch_size, rng),
            SamplerConfig::Pairs { classes_per_batch } => sample_class_pairs(pack, classes_per_batch, rng),
            SamplerConfig::Groups { classes_per_batch, samples_per_class } => {
                sample_class_groups(pack, classes_per_batch, samples_per_class, rng)
            }
        }
    }

    pub fn batch_size(&self) -> usize {
        match *self {
            SamplerConfig::Uniform { batch_size } => batch_size,
            SamplerConfig::Pairs { classes_per_batch } => 2 * classes_per_batch,
            SamplerConfig::Groups { classes_per_batch, samples_per_class } => classes_per_batch * samples_per_class,
        }
    }

    /// Distinct classes a batch needs, if any.
    pub fn classes_needed(&self) -> usize {
        match *self {
            SamplerConfig::Uniform { .. } => 0,
            SamplerConfig::Pairs { classes_per_batch } | SamplerConfig::Groups { classes_per_batch, .. } => {
                classes_per_batch
            }
        }
    }
}

/// `batch_size` indices drawn uniformly with replacement from the whole pack.
pub fn sample_uniform(pack: &DatasetPack, batch_size: usize, rng: &mut RngStream) -> Result<Batch> {
    if pack.is_empty() {
        return Err(Error::Data("cannot sample from an empty pack".into()));
    }
    if batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    let sample_indices: Vec<usize> = (0..batch_size).map(|_| rng.index(pack.len())).collect();
    let labels = sample_indices.iter().map(|&i| pack.label(i)).collect();
    Ok(Batch { sample_indices, labels, structure: BatchStructure::Uniform, resampled_classes: Vec::new() })
}

/// `classes_per_batch` distinct classes with two samples each.
pub fn sample_class_pairs(pack: &DatasetPack, classes_per_batch: usize, rng: &mut RngStream) -> Result<Batch> {
    let mut batch = sample_blocks(pack, classes_per_batch, 2, rng)?;
    batch.structure = BatchStructure::Pairs { classes_per_batch };
    Ok(batch)
}

/// `classes_per_batch` distinct classes with `samples_per_class` samples each.
pub fn sample_class_groups(
    pack: &DatasetPack,
    classes_per_batch: usize,
    samples_per_class: usize,
    rng: &mut RngStream,
) -> Result<Batch> {
    let mut batch = sample_blocks(pack, classes_per_batch, samples_per_class, rng)?;
    batch.structure = BatchStructure::Groups { classes_per_batch, samples_per_class };
    Ok(batch)
}

fn sample_blocks(pack: &DatasetPack, classes: usize, per_class: usize, rng: &mut RngStream) -> Result<Batch> {
    if classes == 0 || per_class == 0 {
        return Err(Error::Parameter("classes and samples per class must be positive".into()));
    }
    let populated: Vec<usize> = (0..pack.num_classes()).filter(|&c| !pack.class_samples(c).is_empty()).collect();
    if populated.len() < classes {
        return Err(Error::Data(format!(
            "batch needs {} classes but the pack has {} non-empty classes ({} short)",
            classes,
            populated.len(),
            classes - populated.len()
        )));
    }
    let mut sample_indices = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    let mut resampled_classes = Vec::new();
    for pick in rng.distinct(populated.len(), classes) {
        let class = populated[pick];
        let members = pack.class_samples(class);
        if members.len() >= per_class {
            sample_indices.extend(rng.distinct(members.len(), per_class).into_iter().map(|j| members[j]));
        } else {
            log::warn!(
                "class {} has {} samples, drawing {} with replacement",
                class,
                members.len(),
                per_class
            );
            resampled_classes.push(class);
            sample_indices.extend((0..per_class).map(|_| members[rng.index(members.len())]));
        }
        labels.extend(core::iter::repeat(class).take(per_class));
    }
    Ok(Batch { sample_indices, labels, structure: BatchStructure::Uniform, resampled_classes })
}

#[cfg(test)]
mod tests;
