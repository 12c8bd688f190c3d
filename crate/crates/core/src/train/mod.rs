//! Training loops, optimizer, schedule and data sampling.

mod adam;
mod data;
mod loops;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{impair, sample_patches, Augment, Batch, Dataset};
pub use loops::{
    train_fidelity, train_perceptual, validation_pairs, FidelityValidator, PerceptualValidator, TrainOutcome,
    Validator,
};

use crate::error::{Error, Result};
use crate::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Fidelity,
    Perceptual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// HR patch side; `48·f` when absent.
    pub patch_size: Option<usize>,
    pub learning_rate: f64,
    /// Steps between learning-rate halvings.
    pub halving_interval: u64,
    pub seed: u64,
    pub max_steps: u64,
    pub validate_every: u64,
    pub flip_h: bool,
    pub flip_v: bool,
    pub rotate90: bool,
    pub mode: TrainMode,
    pub adam: AdamConfig,
    /// Noise amplitude of the noisy output in perceptual training.
    pub perceptual_amplitude: f64,
}

impl TrainConfig {
    /// Published protocol: batch 16, 48f patches, Adam at 1e-4 halved every
    /// 200 000 steps, flip and rotation augmentation.
    pub fn published() -> Self {
        TrainConfig {
            batch_size: 16,
            patch_size: None,
            learning_rate: 1e-4,
            halving_interval: 200_000,
            seed: 0,
            max_steps: 1000,
            validate_every: 100,
            flip_h: true,
            flip_v: true,
            rotate90: true,
            mode: TrainMode::Fidelity,
            adam: AdamConfig::default(),
            perceptual_amplitude: 1.0,
        }
    }

    pub fn patch(&self, factor: usize) -> usize {
        self.patch_size.unwrap_or(48 * factor)
    }

    pub fn validate(&self, factor: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("train.batch_size: must be >= 1".into());
        }
        let p = self.patch(factor);
        if p == 0 || !p.is_multiple_of(factor) {
            return bad(format!("train.patch_size: {p} must be a positive multiple of the factor {factor}"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("train.learning_rate: must be finite and > 0".into());
        }
        if self.halving_interval == 0 {
            return bad("train.halving_interval: must be >= 1".into());
        }
        if self.validate_every == 0 {
            return bad("train.validate_every: must be >= 1".into());
        }
        Ok(())
    }

    /// `lr₀ · 2^(−⌊step / interval⌋)`.
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        let halvings = (step / self.halving_interval).min(1074) as i32;
        self.learning_rate * 0.5f64.powi(halvings)
    }
}

/// Best-so-far parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub params: ParamStore,
    /// Lower is better.
    pub validation: f64,
    pub mode: TrainMode,
}

/// One training step's record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub lr: f64,
    pub terms: Vec<(String, f64)>,
    pub validation: Option<f64>,
}
