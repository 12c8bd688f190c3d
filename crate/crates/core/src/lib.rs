//! Multi-grid back-projection super-resolution.

use std::collections::BTreeMap;

pub mod autograd;
pub mod backend;
pub mod complexity;
mod error;
pub mod graph;
pub mod metrics;
pub mod perceptual;
pub mod run;
pub mod tensor;
pub mod tiling;
pub mod train;

pub use error::{Error, Result};
pub use graph::{MgbpConfig, NetworkGraph};
pub use tensor::Tensor;

/// Named parameters, ordered by key.
pub type ParamStore = BTreeMap<String, Tensor>;
