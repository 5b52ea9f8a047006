//! Reverse-mode automatic differentiation over a Wengert tape.
//!
//! Every operation appends a node holding its forward value, the operands it
//! read and whatever it must remember for the backward pass. Nodes are only
//! ever appended, so the node order is a topological order of the computation
//! and `backward` is a single reverse sweep.

mod activation;
mod conv;
mod ops;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

pub use activation::DEFAULT_LEAKY_SLOPE;
pub use conv::conv_output_size;
pub use ops::Elementwise;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Square(Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    BiasAdd(Var, Var),
    Reshape(Var),
    Reduce { x: Var, map: Vec<usize>, factor: f64 },
    Conv2d { input: Var, kernel: Var, bias: Var, stride: usize, padding: usize },
    MaxPool2d { input: Var, argmax: Vec<u32> },
    LeakyRelu { x: Var, slope: f64 },
    Dropout { x: Var, mask: Vec<f64> },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    EuclideanPairs { features: Var, dists: Vec<f64> },
    BlockVariance { features: Var, blocks: usize, per_block: usize },
}

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub requires_grad: bool,
}

/// Operation recorder. One tape per forward/backward pass; not shared across threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    track_pattern: bool,
    pattern: u64,
    near_kinks: usize,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), track_pattern: false, pattern: FNV_OFFSET, near_kinks: 0 }
    }

    /// A tape that fingerprints every non-smooth decision (leaky-ReLU sign,
    /// max-pool argmax). Two evaluations with equal fingerprints took the same
    /// piecewise-smooth branch.
    pub fn with_pattern_tracking() -> Self {
        Self { track_pattern: true, ..Self::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a leaf; it is differentiated iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let requires_grad = tensor.requires_grad();
        self.push(tensor, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of a leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Moves a leaf out (with its gradient), leaving an empty scalar behind.
    pub fn take(&mut self, v: Var) -> Tensor {
        core::mem::replace(&mut self.nodes[v.0].value, Tensor::scalar(0.0))
    }

    pub fn pattern(&self) -> u64 {
        self.pattern
    }

    /// Number of leaky-ReLU inputs recorded at exactly zero.
    pub fn kinks(&self) -> usize {
        self.near_kinks
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub(crate) fn fold_pattern(&mut self, word: u64) {
        self.pattern = (self.pattern ^ word).wrapping_mul(FNV_PRIME);
    }

    pub(crate) fn tracking(&self) -> bool {
        self.track_pattern
    }

    pub(crate) fn note_kinks(&mut self, n: usize) {
        self.near_kinks += n;
    }

    /// Seeds `d root = 1` and propagates to every leaf that requires a gradient.
    /// Leaves that the root does not depend on receive zeros.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(shape_err!(
                "backward needs a scalar root, got shape {:?}",
                self.nodes[root.0].value.shape()
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut leaf_grads = Vec::new();
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(vec![1.0]);
        }
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Op::Leaf = node.op {
                leaf_grads.push((i, g));
            } else {
                self.backward_node(node, &g, &mut grads);
            }
        }
        for node in self.nodes.iter_mut() {
            if matches!(node.op, Op::Leaf) && node.requires_grad {
                let n = node.value.len();
                node.value.set_grad(vec![0.0; n]);
            }
        }
        for (i, g) in leaf_grads {
            self.nodes[i].value.set_grad(g);
        }
        Ok(())
    }

    fn backward_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| axpy(ga, 1.0, g));
                self.accumulate(grads, *b, |gb| axpy(gb, 1.0, g));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| axpy(ga, 1.0, g));
                self.accumulate(grads, *b, |gb| axpy(gb, -1.0, g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |ga| {
                    for ((o, gi), bi) in ga.iter_mut().zip(g).zip(vb) {
                        *o += gi * bi;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((o, gi), ai) in gb.iter_mut().zip(g).zip(va) {
                        *o += gi * ai;
                    }
                });
            }
            Op::Square(a) => {
                let va = self.value(*a).data();
                self.accumulate(grads, *a, |ga| {
                    for ((o, gi), ai) in ga.iter_mut().zip(g).zip(va) {
                        *o += 2.0 * ai * gi;
                    }
                });
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, |ga| axpy(ga, *c, g)),
            Op::MatMul(a, b) => ops::matmul_backward(self, *a, *b, g, grads),
            Op::BiasAdd(x, b) => ops::bias_add_backward(self, *x, *b, g, grads),
            Op::Reshape(x) => self.accumulate(grads, *x, |gx| axpy(gx, 1.0, g)),
            Op::Reduce { x, map, factor } => self.accumulate(grads, *x, |gx| {
                for (o, &j) in gx.iter_mut().zip(map) {
                    *o += factor * g[j];
                }
            }),
            Op::Conv2d { input, kernel, bias, stride, padding } => {
                conv::conv2d_backward(self, *input, *kernel, *bias, *stride, *padding, g, grads)
            }
            Op::MaxPool2d { input, argmax } => self.accumulate(grads, *input, |gx| {
                for (gi, &src) in g.iter().zip(argmax) {
                    gx[src as usize] += gi;
                }
            }),
            Op::LeakyRelu { x, slope } => {
                let vx = self.value(*x).data();
                self.accumulate(grads, *x, |gx| {
                    for ((o, gi), xi) in gx.iter_mut().zip(g).zip(vx) {
                        *o += if *xi >= 0.0 { *gi } else { slope * gi };
                    }
                })
            }
            Op::Dropout { x, mask } => self.accumulate(grads, *x, |gx| {
                for ((o, gi), m) in gx.iter_mut().zip(g).zip(mask) {
                    *o += gi * m;
                }
            }),
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let k = self.shape(*logits)[1];
                self.accumulate(grads, *logits, |gl| {
                    crate::losses::softmax_cross_entropy_backward(probs, labels, k, g[0], gl)
                })
            }
            Op::EuclideanPairs { features, dists } => {
                let x = self.value(*features);
                self.accumulate(grads, *features, |gf| {
                    crate::losses::euclidean_pairs_backward(x, dists, g[0], gf)
                })
            }
            Op::BlockVariance { features, blocks, per_block } => {
                let x = self.value(*features);
                self.accumulate(grads, *features, |gf| {
                    crate::losses::block_variance_backward(x, *blocks, *per_block, g[0], gf)
                })
            }
        }
    }

    /// Runs `f` on the gradient buffer of `v`, creating it if needed. No-op when
    /// `v` does not require a gradient.
    pub(crate) fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        let buf = grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]);
        f(buf);
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
