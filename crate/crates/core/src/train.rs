//! SGD training over class-structured batches, and recognition-rate evaluation.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Mode, Tape};
use crate::dataset::DatasetPack;
use crate::error::{Error, Result};
use crate::losses::{combined_loss, LossKind, LossVariant};
use crate::model::{build_model, collect_grads, forward, sgd_step, ModelConfig, ModelParams};
use crate::rng::{streams, RngStream};
use crate::sampler::SamplerConfig;
use crate::tensor::Tensor;

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
/// Learning rate for the narrow desk-scale model, which trains slowly at 0.01.
pub const DESK_LEARNING_RATE: f64 = 0.03;
/// Euclidean weight for the desk-scale model. At weight 1 the pair term drives
/// the narrow penultimate layer to zero before the classifier separates anything.
pub const DESK_EUCLIDEAN_LAMBDA: f64 = 0.03;
const EVAL_CHUNK: usize = 32;

/// Which activations the similarity term is computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FeatureSource {
    /// Output of the last hidden layer, before dropout.
    #[default]
    Penultimate,
    Logits,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub variant: LossVariant,
    pub sampler: SamplerConfig,
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    /// Evaluate every this many steps; 0 disables periodic evaluation.
    pub eval_every: usize,
    pub feature_source: FeatureSource,
}

/// Full-scale batch layout per model: A uniform 200, B 90 pairs, C 5 groups of 40.
pub fn full_sampler(kind: LossKind) -> SamplerConfig {
    match kind {
        LossKind::SoftmaxOnly => SamplerConfig::Uniform { batch_size: 200 },
        LossKind::SoftmaxPlusEuclidean => SamplerConfig::Pairs { classes_per_batch: 90 },
        LossKind::SoftmaxPlusVariance => SamplerConfig::Groups { classes_per_batch: 5, samples_per_class: 40 },
    }
}

/// Scaled-down layout for 10-class packs: A uniform 40, B 10 pairs, C 5 groups of 8.
pub fn desk_sampler(kind: LossKind) -> SamplerConfig {
    match kind {
        LossKind::SoftmaxOnly => SamplerConfig::Uniform { batch_size: 40 },
        LossKind::SoftmaxPlusEuclidean => SamplerConfig::Pairs { classes_per_batch: 10 },
        LossKind::SoftmaxPlusVariance => SamplerConfig::Groups { classes_per_batch: 5, samples_per_class: 8 },
    }
}

impl TrainConfig {
    pub fn full(kind: LossKind, num_classes: usize) -> Self {
        Self {
            variant: LossVariant { kind, lambda: 1.0 },
            sampler: full_sampler(kind),
            model: ModelConfig::full(num_classes),
            learning_rate: DEFAULT_LEARNING_RATE,
            steps: 1000,
            seed: 0,
            eval_every: 0,
            feature_source: FeatureSource::Penultimate,
        }
    }

    pub fn desk(kind: LossKind, num_classes: usize) -> Self {
        let lambda = if kind == LossKind::SoftmaxPlusEuclidean { DESK_EUCLIDEAN_LAMBDA } else { 1.0 };
        Self {
            variant: LossVariant { kind, lambda },
            sampler: desk_sampler(kind),
            learning_rate: DESK_LEARNING_RATE,
            model: ModelConfig::desk(num_classes),
            steps: 500,
            ..Self::full(kind, num_classes)
        }
    }

    /// Everything that can be checked before step 0.
    pub fn validate(&self, pack: &DatasetPack) -> Result<()> {
        self.model.validate()?;
        let compatible = matches!(
            (self.variant.kind, self.sampler),
            (LossKind::SoftmaxOnly, SamplerConfig::Uniform { .. })
                | (LossKind::SoftmaxPlusEuclidean, SamplerConfig::Pairs { .. })
                | (LossKind::SoftmaxPlusVariance, SamplerConfig::Groups { .. })
        );
        if !compatible {
            return Err(Error::Config(format!(
                "variant {} cannot train on {:?} batches",
                self.variant.kind.letter(),
                self.sampler
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.variant.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda {}", self.variant.lambda)));
        }
        if self.sampler.batch_size() == 0 {
            return Err(Error::Config("empty batches".into()));
        }
        if pack.is_empty() {
            return Err(Error::Config("dataset pack has no samples".into()));
        }
        if self.model.num_classes != pack.num_classes() {
            return Err(Error::Config(format!(
                "model head has {} classes, pack has {}",
                self.model.num_classes,
                pack.num_classes()
            )));
        }
        let populated = (0..pack.num_classes()).filter(|&c| !pack.class_samples(c).is_empty()).count();
        let needed = self.sampler.classes_needed();
        if needed > populated {
            return Err(Error::Config(format!(
                "sampler needs {} classes per batch but the pack has {} ({} short); lower --classes-per-batch",
                needed,
                populated,
                needed - populated
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based index of the completed step.
    pub step: usize,
    pub total_loss: f64,
    pub ce_loss: f64,
    /// Unweighted similarity term; 0 for the softmax-only variant.
    pub sim_loss: f64,
}

pub struct Trainer<'a> {
    config: TrainConfig,
    pack: &'a DatasetPack,
    params: ModelParams,
    sampler_rng: RngStream,
    dropout_rng: RngStream,
    step: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, pack: &'a DatasetPack) -> Result<Self> {
        config.validate(pack)?;
        let params = build_model(&config.model, &mut RngStream::fork(config.seed, streams::INIT))?;
        Ok(Self {
            sampler_rng: RngStream::fork(config.seed, streams::SAMPLER),
            dropout_rng: RngStream::fork(config.seed, streams::DROPOUT),
            config,
            pack,
            params,
            step: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Sample, forward, loss, backward, update.
    pub fn step(&mut self) -> Result<StepRecord> {
        let batch = self.config.sampler.sample(self.pack, &mut self.sampler_rng)?;
        let images = self.pack.batch_images(&batch.sample_indices)?;
        let mut tape = Tape::new();
        let vars = self.params.attach(&mut tape);
        let x = tape.constant(images);
        let out = forward(&mut tape, &self.config.model, &vars, x, Mode::Train, &mut self.dropout_rng)?;
        let features = match self.config.feature_source {
            FeatureSource::Penultimate => out.features,
            FeatureSource::Logits => out.logits,
        };
        let terms = combined_loss(&mut tape, &self.config.variant, out.logits, features, &batch.labels, &batch.structure)?;
        tape.backward(terms.total)?;
        let grads = collect_grads(&tape, &vars)?;
        sgd_step(&mut self.params, &grads, self.config.learning_rate)?;
        self.step += 1;
        Ok(StepRecord {
            step: self.step,
            total_loss: tape.value(terms.total).item()?,
            ce_loss: tape.value(terms.cross_entropy).item()?,
            sim_loss: match terms.similarity {
                Some(s) => tape.value(s).item()?,
                None => 0.0,
            },
        })
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode predictions and features for every sample of `pack`, in pack order.
pub fn predict(params: &ModelParams, pack: &DatasetPack) -> Result<(Vec<usize>, Tensor)> {
    if params.config().num_classes != pack.num_classes() {
        return Err(Error::Config(format!(
            "model head has {} classes, pack has {}",
            params.config().num_classes,
            pack.num_classes()
        )));
    }
    let width = params.config().feature_width();
    let mut predictions = Vec::with_capacity(pack.len());
    let mut features = Vec::with_capacity(pack.len() * width);
    let indices: Vec<usize> = (0..pack.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (logits, feats) = params.infer(&pack.batch_images(chunk)?)?;
        let k = logits.shape()[1];
        predictions.extend(logits.data().chunks_exact(k).map(argmax));
        features.extend_from_slice(feats.data());
    }
    if pack.is_empty() {
        return Ok((predictions, Tensor::scalar(0.0)));
    }
    Ok((predictions, Tensor::new(&[pack.len(), width], features)?))
}

/// Fraction of samples whose top logit is the true class.
pub fn evaluate(params: &ModelParams, pack: &DatasetPack) -> Result<f64> {
    let (predictions, _) = predict(params, pack)?;
    Ok(recognition_rate(&predictions, pack.labels()))
}

pub fn recognition_rate(predictions: &[usize], labels: &[u32]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(&p, &l)| p == l as usize).count();
    hits as f64 / labels.len() as f64
}

/// Per-class population variance of each feature, averaged over features and
/// over classes with at least one sample.
pub fn intra_class_variance(features: &Tensor, labels: &[u32], num_classes: usize) -> f64 {
    let d = features.shape()[features.rank() - 1];
    let mut total = 0.0;
    let mut classes = 0;
    for c in 0..num_classes {
        let rows: Vec<&[f64]> = labels.iter().enumerate().filter(|(_, &l)| l as usize == c).map(|(i, _)| features.row(i)).collect();
        if rows.is_empty() {
            continue;
        }
        let n = rows.len() as f64;
        let mut var = 0.0;
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            var += rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
        }
        total += var / d as f64;
        classes += 1;
    }
    if classes == 0 {
        0.0
    } else {
        total / classes as f64
    }
}

/// Mean Euclidean distance over all same-class pairs.
pub fn intra_class_distance(features: &Tensor, labels: &[u32]) -> f64 {
    let (mut total, mut pairs) = (0.0, 0usize);
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] == labels[j] {
                let d2: f64 = features.row(i).iter().zip(features.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                total += libm::sqrt(d2);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}
