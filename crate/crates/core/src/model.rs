//! The character CNN: six conv/leaky-ReLU/max-pool stages, fully connected
//! hidden layers with dropout, and a linear classifier head.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{conv_output_size, Mode, Tape, Var, DEFAULT_LEAKY_SLOPE};
use crate::error::{shape_err, Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub input_size: usize,
    pub in_channels: usize,
    /// Filters per conv stage; every stage ends in a 2x2 max pool.
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub conv_stride: usize,
    pub conv_padding: usize,
    /// Hidden fully connected widths, each followed by leaky ReLU and dropout.
    pub fc_widths: Vec<usize>,
    pub dropout_prob: f64,
    pub num_classes: usize,
    pub leaky_slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full(300)
    }
}

impl ModelConfig {
    /// Conv-32/64/128/256/256/512, FC1024 x 2 with dropout 0.25, then the head.
    pub fn full(num_classes: usize) -> Self {
        Self {
            input_size: 128,
            in_channels: 1,
            conv_channels: alloc::vec![32, 64, 128, 256, 256, 512],
            kernel_size: 3,
            conv_stride: 1,
            conv_padding: 1,
            fc_widths: alloc::vec![1024, 1024],
            dropout_prob: 0.25,
            num_classes,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// Same layer sequence as [`ModelConfig::full`] with narrow layers, sized
    /// for single-core CPU training on small packs.
    pub fn desk(num_classes: usize) -> Self {
        Self {
            conv_channels: alloc::vec![4, 8, 8, 16, 16, 16],
            fc_widths: alloc::vec![64, 64],
            ..Self::full(num_classes)
        }
    }

    /// 16x16 input, two stages of two filters, one hidden layer of 8.
    pub fn tiny(num_classes: usize) -> Self {
        Self {
            input_size: 16,
            conv_channels: alloc::vec![2, 2],
            fc_widths: alloc::vec![8],
            ..Self::full(num_classes)
        }
    }

    /// Spatial side after each conv+pool stage.
    pub fn spatial_chain(&self) -> Result<Vec<usize>> {
        let mut size = self.input_size;
        let mut chain = Vec::with_capacity(self.conv_channels.len());
        for (i, _) in self.conv_channels.iter().enumerate() {
            let conv = conv_output_size(size, self.kernel_size, self.conv_stride.max(1), self.conv_padding)
                .ok_or_else(|| Error::Config(format!("stage {}: kernel larger than {}px input", i + 1, size)))?;
            if conv < 2 || conv % 2 != 0 {
                return Err(Error::Config(format!("stage {}: {}px cannot be 2x2 pooled", i + 1, conv)));
            }
            size = conv / 2;
            chain.push(size);
        }
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad(format!("conv channels {:?}", self.conv_channels));
        }
        if self.fc_widths.is_empty() || self.fc_widths.contains(&0) {
            return bad(format!("fc widths {:?}", self.fc_widths));
        }
        if self.in_channels == 0 || self.num_classes == 0 || self.kernel_size == 0 || self.conv_stride == 0 {
            return bad("zero-sized input channels, classes, kernel or stride".into());
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout probability {}", self.dropout_prob));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return bad(format!("leaky slope {}", self.leaky_slope));
        }
        self.spatial_chain().map(|_| ())
    }

    /// Width of the flattened conv output.
    pub fn flatten_width(&self) -> Result<usize> {
        let side = *self.spatial_chain()?.last().expect("validated non-empty");
        Ok(side * side * self.conv_channels.last().expect("validated non-empty"))
    }

    /// Width of the feature vector the similarity losses see.
    pub fn feature_width(&self) -> usize {
        *self.fc_widths.last().expect("validated non-empty")
    }

    /// `(name, shape)` of every learnable tensor, in a fixed order.
    pub fn param_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let k = self.kernel_size;
        let mut shapes = Vec::new();
        let mut channels = self.in_channels;
        for (i, &f) in self.conv_channels.iter().enumerate() {
            shapes.push((format!("conv{}.weight", i + 1), alloc::vec![f, channels, k, k]));
            shapes.push((format!("conv{}.bias", i + 1), alloc::vec![f]));
            channels = f;
        }
        let mut width = self.flatten_width()?;
        for (i, &n) in self.fc_widths.iter().enumerate() {
            shapes.push((format!("fc{}.weight", i + 1), alloc::vec![width, n]));
            shapes.push((format!("fc{}.bias", i + 1), alloc::vec![n]));
            width = n;
        }
        shapes.push(("head.weight".into(), alloc::vec![width, self.num_classes]));
        shapes.push(("head.bias".into(), alloc::vec![self.num_classes]));
        Ok(shapes)
    }
}

pub fn param_count(config: &ModelConfig) -> Result<usize> {
    Ok(config.param_shapes()?.iter().map(|(_, s)| s.iter().product::<usize>()).sum())
}

/// Learnable tensors of one network, addressable by layer name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: Vec<(String, Tensor)>,
}

/// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
pub fn build_model(config: &ModelConfig, rng: &mut RngStream) -> Result<ModelParams> {
    let mut tensors = Vec::new();
    for (name, shape) in config.param_shapes()? {
        let n: usize = shape.iter().product();
        let values = if name.ends_with(".bias") {
            alloc::vec![0.0; n]
        } else {
            let fan_in: usize = if shape.len() == 4 { shape[1..].iter().product() } else { shape[0] };
            let std = libm::sqrt(2.0 / fan_in as f64);
            (0..n).map(|_| std * rng.normal()).collect()
        };
        tensors.push((name, Tensor::new(&shape, values)?.with_requires_grad(true)));
    }
    Ok(ModelParams { config: config.clone(), tensors })
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    pub logits: Var,
    pub features: Var,
}

impl ModelParams {
    /// Reassembles parameters, checking names and shapes against `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let expected = config.param_shapes()?;
        if expected.len() != tensors.len() {
            return Err(Error::Config(format!("expected {} tensors, got {}", expected.len(), tensors.len())));
        }
        for ((name, shape), (got_name, t)) in expected.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != t.shape() {
                return Err(Error::Config(format!(
                    "expected {} {:?}, got {} {:?}",
                    name,
                    shape,
                    got_name,
                    t.shape()
                )));
            }
        }
        let tensors = tensors.into_iter().map(|(n, t)| (n, t.with_requires_grad(true))).collect();
        Ok(Self { config: config.clone(), tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.tensors.iter_mut().map(|(_, t)| t)
    }

    /// Puts every tensor on the tape as a differentiable leaf.
    pub fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|(_, t)| tape.param(t.clone())).collect()
    }

    /// Puts every tensor on the tape as a constant.
    pub fn attach_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|(_, t)| tape.constant(t.clone())).collect()
    }

    /// Eval-mode logits and features for a batch of images.
    pub fn infer(&self, images: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let vars = self.attach_frozen(&mut tape);
        let x = tape.constant(images.clone());
        let out = forward(&mut tape, &self.config, &vars, x, Mode::Eval, &mut RngStream::new(0))?;
        let logits = tape.take(out.logits);
        let features = tape.take(out.features);
        Ok((logits, features))
    }
}

/// Records the network on `tape`. `params` are the vars from
/// [`ModelParams::attach`]; `images` is `N x C x H x W`.
pub fn forward(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &[Var],
    images: Var,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<ForwardOutput> {
    let stages = config.conv_channels.len();
    let expected_params = 2 * (stages + config.fc_widths.len() + 1);
    if params.len() != expected_params {
        return Err(Error::Config(format!("{} parameter vars, model needs {}", params.len(), expected_params)));
    }
    let s = config.input_size;
    let n = match tape.shape(images) {
        &[n, c, h, w] if c == config.in_channels && h == s && w == s => n,
        other => {
            return Err(shape_err!(
                "images {:?}, model expects N x {} x {} x {}",
                other,
                config.in_channels,
                s,
                s
            ))
        }
    };
    let mut x = images;
    for stage in 0..stages {
        x = tape.conv2d(x, params[2 * stage], params[2 * stage + 1], config.conv_stride, config.conv_padding)?;
        x = tape.leaky_relu(x, config.leaky_slope)?;
        x = tape.maxpool2d(x)?;
    }
    let flat = tape.value(x).len() / n;
    x = tape.reshape(x, &[n, flat])?;
    let mut features = x;
    for layer in 0..config.fc_widths.len() {
        let p = 2 * (stages + layer);
        x = tape.linear(x, params[p], params[p + 1])?;
        x = tape.leaky_relu(x, config.leaky_slope)?;
        features = x;
        x = tape.dropout(x, config.dropout_prob, mode, rng)?;
    }
    let p = 2 * (stages + config.fc_widths.len());
    let logits = tape.linear(x, params[p], params[p + 1])?;
    Ok(ForwardOutput { logits, features })
}

/// Gradients of the attached parameters after `tape.backward`, shaped like the parameters.
pub fn collect_grads(tape: &Tape, vars: &[Var]) -> Result<Vec<Tensor>> {
    vars.iter()
        .map(|&v| {
            let grad = tape.grad(v).ok_or_else(|| Error::Config("parameter has no gradient".into()))?;
            Tensor::new(tape.shape(v), grad.to_vec())
        })
        .collect()
}

/// Plain SGD: `w <- w - learning_rate * g` for every tensor.
pub fn sgd_step(params: &mut ModelParams, grads: &[Tensor], learning_rate: f64) -> Result<()> {
    if grads.len() != params.len() {
        return Err(shape_err!("{} gradients for {} parameter tensors", grads.len(), params.len()));
    }
    for ((name, p), g) in params.tensors.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(shape_err!("gradient {:?} for {} {:?}", g.shape(), name, p.shape()));
        }
    }
    for (p, g) in params.tensors_mut().zip(grads) {
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= learning_rate * d;
        }
    }
    Ok(())
}
