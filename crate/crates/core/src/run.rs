//! Run configuration documents: strict JSON with a version field, resolved
//! to an effective configuration with every default spelled out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MgbpConfig;
use crate::perceptual::{DiscriminatorConfig, LossWeights, VnscConfig};
use crate::tiling::TileSettings;
use crate::train::TrainConfig;

pub const RUN_CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPaths {
    #[serde(default)]
    pub train_images: Vec<PathBuf>,
    #[serde(default)]
    pub validation_images: Vec<PathBuf>,
}

/// A run document. Optional sections take defaults in [`RunConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub model: MgbpConfig,
    #[serde(default = "TrainConfig::published")]
    pub train: TrainConfig,
    #[serde(default)]
    pub loss_weights: LossWeights,
    #[serde(default)]
    pub vnsc: VnscConfig,
    #[serde(default)]
    pub discriminator: Option<DiscriminatorConfig>,
    #[serde(default)]
    pub tiling: Option<TileSettings>,
    #[serde(default)]
    pub paths: RunPaths,
}

impl RunConfig {
    /// Published training protocol around `model`.
    pub fn with_model(model: MgbpConfig) -> Self {
        RunConfig {
            version: RUN_CONFIG_VERSION,
            seed: 0,
            model,
            train: TrainConfig::published(),
            loss_weights: LossWeights::default(),
            vnsc: VnscConfig::default(),
            discriminator: None,
            tiling: None,
            paths: RunPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        if cfg.version != RUN_CONFIG_VERSION {
            return Err(Error::Config(format!(
                "version: expected {RUN_CONFIG_VERSION}, got {}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    /// Fills every optional section and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        self.model.validate()?;
        let f = self.model.scale_factor;
        self.train.patch_size = Some(self.train.patch(f));
        self.train.validate(f)?;
        self.loss_weights.validate()?;
        if self.vnsc.kernel_size.is_multiple_of(2) {
            return Err(Error::Config("vnsc.kernel_size: must be odd".into()));
        }
        let mut disc = self.discriminator.take().unwrap_or_else(|| {
            let mut d = DiscriminatorConfig::for_factor(f);
            d.image_channels = self.model.image_channels;
            d
        });
        disc.vnsc = self.vnsc.clone();
        disc.validate()?;
        self.discriminator = Some(disc);
        if self.tiling.is_none() {
            let mut t = TileSettings::new([1, 64, 64]);
            t.align = self.model.level_scale(1);
            self.tiling = Some(t);
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }
}
