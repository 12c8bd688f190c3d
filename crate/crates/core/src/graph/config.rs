use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ConvSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dims {
    #[serde(rename = "2d")]
    D2,
    #[serde(rename = "3d")]
    D3,
}

/// Generator hyper-parameters.
///
/// Levels are numbered `1..=levels` from the lowest resolution up, matching
/// the recursion `BP_k`; `channels_per_level[k - 1]` is the feature width at
/// level `k`, so the list reads lowest → highest resolution (the order of the
/// published configuration table).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgbpConfig {
    pub levels: usize,
    pub steps: usize,
    pub channels_per_level: Vec<usize>,
    pub scale_factor: usize,
    pub image_channels: usize,
    /// Spatial resolution ratio between adjacent levels.
    pub level_stride: usize,
    /// Upscaler/Downscaler spatial kernel; must equal `level_stride + 2·scaler_pad`.
    pub scaler_kernel: usize,
    pub scaler_pad: usize,
    pub analysis_kernel: usize,
    pub synthesis_kernel: usize,
    /// Temporal kernel of each down/up stage, listed from the stage leaving
    /// the top level downwards (`levels − 1` entries). Cubes only.
    pub temporal_kernels: Vec<usize>,
    pub temporal_padding: bool,
    pub noise_amplitude: f64,
    pub dims: Dims,
}

impl MgbpConfig {
    /// A 2-D configuration with the default scaler geometry for stride 2.
    pub fn new_2d(levels: usize, steps: usize, channels_per_level: Vec<usize>, scale_factor: usize) -> Self {
        MgbpConfig {
            levels,
            steps,
            channels_per_level,
            scale_factor,
            image_channels: 3,
            level_stride: 2,
            scaler_kernel: 4,
            scaler_pad: 1,
            analysis_kernel: 3,
            synthesis_kernel: 3,
            temporal_kernels: Vec::new(),
            temporal_padding: false,
            noise_amplitude: 0.0,
            dims: Dims::D2,
        }
    }

    /// Uses stride-3 scalers (kernel 5, pad 1) between levels.
    pub fn with_level_stride_3(mut self) -> Self {
        self.level_stride = 3;
        self.scaler_kernel = 5;
        self.scaler_pad = 1;
        self
    }

    /// Published MGBPv2 image configurations.
    pub fn preset_v2(factor: usize) -> Result<Self> {
        let (steps, channels) = match factor {
            2 | 3 => (32, vec![192, 128]),
            4 => (4, vec![192, 128, 64, 32]),
            8 => (2, vec![192, 128, 64, 32, 16]),
            16 => (2, vec![256, 192, 128, 92, 48, 9]),
            f => return Err(Error::Config(format!("no published configuration for factor {f}"))),
        };
        Ok(Self::new_2d(channels.len(), steps, channels, factor))
    }

    /// Published MGBP-3D video configurations.
    ///
    /// Which stages carry a temporal kernel of 3 is not published. The 16×
    /// preset puts kernel 3 on the four lowest stages and kernel 1 on the top
    /// one, which reproduces the 37 → 29 frame accounting without padding.
    pub fn preset_3d(factor: usize) -> Result<Self> {
        let (steps, channels, temporal) = match factor {
            4 => (6, vec![192, 128, 64, 32], vec![1, 3, 3]),
            16 => (2, vec![256, 192, 128, 92, 48, 9], vec![1, 3, 3, 3, 3]),
            f => return Err(Error::Config(format!("no published 3-D configuration for factor {f}"))),
        };
        let mut c = Self::new_2d(channels.len(), steps, channels, factor);
        c.dims = Dims::D3;
        c.temporal_kernels = temporal;
        Ok(c)
    }

    /// Small configuration for desk-scale experiments and tests.
    pub fn toy(levels: usize, steps: usize, channels: usize) -> Self {
        Self::new_2d(levels, steps, vec![channels; levels], 4)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.levels == 0 {
            return cfg("levels: must be >= 1".into());
        }
        if self.steps == 0 {
            return cfg("steps: must be >= 1".into());
        }
        if self.channels_per_level.len() != self.levels {
            return cfg(format!(
                "channels_per_level: has {} entries but levels = {}",
                self.channels_per_level.len(),
                self.levels
            ));
        }
        if self.channels_per_level.contains(&0) {
            return cfg("channels_per_level: entries must be >= 1".into());
        }
        if ![2, 3, 4, 8, 16].contains(&self.scale_factor) {
            return cfg(format!("scale_factor: {} not in {{2,3,4,8,16}}", self.scale_factor));
        }
        if self.image_channels == 0 {
            return cfg("image_channels: must be >= 1".into());
        }
        if self.level_stride < 2 {
            return cfg("level_stride: must be >= 2".into());
        }
        if self.scaler_kernel != self.level_stride + 2 * self.scaler_pad {
            return cfg(format!(
                "scaler_kernel: {} must equal level_stride + 2·scaler_pad = {} for exact size relations",
                self.scaler_kernel,
                self.level_stride + 2 * self.scaler_pad
            ));
        }
        for (name, k) in [("analysis_kernel", self.analysis_kernel), ("synthesis_kernel", self.synthesis_kernel)] {
            if k % 2 == 0 {
                return cfg(format!("{name}: must be odd, got {k}"));
            }
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return cfg(format!("noise_amplitude: must be finite and >= 0, got {}", self.noise_amplitude));
        }
        match self.dims {
            Dims::D2 => {
                if self.temporal_kernels.iter().any(|&k| k != 1) {
                    return cfg("temporal_kernels: only valid for 3d configurations".into());
                }
            }
            Dims::D3 => {
                if self.temporal_kernels.len() != self.levels - 1 {
                    return cfg(format!(
                        "temporal_kernels: has {} entries but there are {} down/up stages",
                        self.temporal_kernels.len(),
                        self.levels - 1
                    ));
                }
                if self.temporal_kernels.contains(&0) {
                    return cfg("temporal_kernels: entries must be >= 1".into());
                }
                if self.temporal_padding && self.temporal_kernels.iter().any(|k| k % 2 == 0) {
                    return cfg("temporal_kernels: must be odd when temporal_padding is on".into());
                }
            }
        }
        Ok(())
    }

    pub fn is_cube(&self) -> bool {
        self.dims == Dims::D3
    }

    /// Feature width at level `k` (1 = lowest resolution).
    pub fn channels(&self, k: usize) -> usize {
        self.channels_per_level[k - 1]
    }

    /// Temporal kernel of the stage between level `k` and `k − 1`.
    pub fn stage_temporal_kernel(&self, k: usize) -> usize {
        match self.dims {
            Dims::D2 => 1,
            Dims::D3 => self.temporal_kernels[self.levels - k],
        }
    }

    fn temporal_pad(&self, kernel: usize) -> usize {
        if self.temporal_padding {
            (kernel - 1) / 2
        } else {
            0
        }
    }

    /// Total stride from full resolution down to level `k`.
    pub fn level_scale(&self, k: usize) -> usize {
        self.level_stride.pow((self.levels - k) as u32)
    }

    /// Frames lost between full resolution and level `k` when temporal
    /// padding is off.
    pub fn frames_lost_above(&self, k: usize) -> usize {
        if self.temporal_padding {
            return 0;
        }
        ((k + 1)..=self.levels).map(|j| self.stage_temporal_kernel(j) - 1).sum()
    }

    /// Analysis_k: strided conv from `[X, noise]` straight to level `k`.
    pub fn analysis_spec(&self, k: usize) -> ConvSpec {
        let s = self.level_scale(k);
        let (kernel, pad) = if s == 1 {
            (self.analysis_kernel, self.analysis_kernel / 2)
        } else {
            (s + 2 * (s / 2), s / 2)
        };
        let (kt, pt) = if self.is_cube() {
            let kt = 1 + ((k + 1)..=self.levels)
                .map(|j| self.stage_temporal_kernel(j) - 1)
                .sum::<usize>();
            (kt, self.temporal_pad(kt))
        } else {
            (1, 0)
        };
        ConvSpec::new(
            self.image_channels + 1,
            self.channels(k),
            [kt, kernel, kernel],
            [1, s, s],
            [pt, pad, pad],
        )
    }

    pub fn synthesis_spec(&self) -> ConvSpec {
        let k = self.synthesis_kernel;
        ConvSpec::square(self.channels(self.levels), self.image_channels, k, 1, k / 2)
    }

    /// Downscaler of a step at level `k`: level `k` → level `k − 1`.
    pub fn down_spec(&self, k: usize) -> ConvSpec {
        let kt = self.stage_temporal_kernel(k);
        ConvSpec::new(
            self.channels(k),
            self.channels(k - 1),
            [kt, self.scaler_kernel, self.scaler_kernel],
            [1, self.level_stride, self.level_stride],
            [self.temporal_pad(kt), self.scaler_pad, self.scaler_pad],
        )
    }

    /// Upscaler of a step at level `k`: `[y_{k−1}, c]` → level `k`.
    pub fn up_spec(&self, k: usize) -> ConvSpec {
        let kt = self.stage_temporal_kernel(k);
        ConvSpec::new(
            2 * self.channels(k - 1),
            self.channels(k),
            [kt, self.scaler_kernel, self.scaler_kernel],
            [1, self.level_stride, self.level_stride],
            [self.temporal_pad(kt), self.scaler_pad, self.scaler_pad],
        )
    }

    /// Checks that an input of this shape runs: channel count, spatial
    /// divisibility by the lowest level's stride, and enough frames.
    pub fn check_input_shape(&self, shape: &[usize]) -> Result<()> {
        let expected_rank = if self.is_cube() { 5 } else { 4 };
        if shape.len() != expected_rank {
            return Err(Error::Shape(format!(
                "expected a rank-{expected_rank} input for a {:?} network, got {shape:?}",
                self.dims
            )));
        }
        if shape[1] != self.image_channels {
            return Err(Error::dim("channels", self.image_channels, shape[1]));
        }
        let s = self.level_scale(1);
        for (name, &d) in ["height", "width"].iter().zip(&shape[shape.len() - 2..]) {
            if d % s != 0 {
                return Err(Error::Shape(format!(
                    "{name} {d} is not divisible by the lowest-level stride {s}"
                )));
            }
        }
        if self.is_cube() {
            let t = shape[2];
            let lost = self.frames_lost_above(1);
            if t <= lost {
                return Err(Error::Shape(format!(
                    "temporal extent underflow: {t} frames lose {lost} on the way to level 1"
                )));
            }
        }
        Ok(())
    }

    /// Canonical JSON, also the input of the checkpoint digest.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
