//! File formats, GNT import and training runs on top of `hccr-core`.

pub mod checkpoint;
mod error;
pub mod gnt;
pub mod metrics;
pub mod pack;
pub mod run;

pub use error::{Error, Result};
