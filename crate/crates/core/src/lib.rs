//! Tensor autodiff, a six-convolution character CNN, metric-learning losses,
//! class-structured batch samplers and the image preprocessing pipeline for
//! offline handwritten character recognition.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line and
//! anything touching the filesystem live in the `hccr` companion crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod autodiff;
pub mod dataset;
mod error;
pub mod gradcheck;
mod linalg;
pub mod losses;
pub mod model;
pub mod rng;
pub mod sampler;
mod tensor;
pub mod train;

pub use autodiff::{Elementwise, Mode, Tape, Var};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::Tensor;
