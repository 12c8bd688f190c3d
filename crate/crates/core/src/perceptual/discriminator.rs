use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vnsc::{vnsc_var, VnscConfig};
use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, Direction, Tensor};
use crate::ParamStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// Number of input resolutions: full, ½, ¼, …
    pub scales: usize,
    pub width: usize,
    pub layers_per_block: usize,
    pub image_channels: usize,
    pub vnsc: VnscConfig,
    /// Start the scoring head at zero so every input scores 0.
    pub zero_head: bool,
}

impl DiscriminatorConfig {
    /// One scale per factor of the loss pyramid plus full resolution.
    pub fn for_factor(factor: usize) -> Self {
        DiscriminatorConfig {
            scales: 1 + super::factor_pyramid(factor).len(),
            width: 64,
            layers_per_block: 4,
            image_channels: 3,
            vnsc: VnscConfig::default(),
            zero_head: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.scales == 0 {
            return bad("discriminator.scales: must be >= 1");
        }
        if self.width == 0 {
            return bad("discriminator.width: must be >= 1");
        }
        if self.layers_per_block == 0 {
            return bad("discriminator.layers_per_block: must be >= 1");
        }
        if self.image_channels != 3 {
            return bad("discriminator.image_channels: luminance needs 3 channels");
        }
        Ok(())
    }

    fn layer_spec(&self, block: usize, layer: usize) -> ConvSpec {
        let cin = match (block, layer) {
            (0, 0) => self.vnsc.channels(),
            (_, 0) => self.width + self.vnsc.channels(),
            _ => self.width,
        };
        let stride = if layer + 1 == self.layers_per_block { 2 } else { 1 };
        ConvSpec::square(cin, self.width, 3, stride, 1)
    }

    fn head_spec(&self) -> ConvSpec {
        ConvSpec::square(self.width, 1, 1, 1, 0)
    }
}

fn layer_key(block: usize, layer: usize) -> String {
    format!("disc.b{block}.conv{layer}")
}

const HEAD_KEY: &str = "disc.head";

/// Multiscale VN+SC discriminator. Block `i` sees VN+SC of the input at
/// scale `2^-i`, concatenated (for `i > 0`) with the stride-2 features of
/// block `i − 1`; CNN blocks share nothing.
#[derive(Clone, Debug)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    params: ParamStore,
}

impl Discriminator {
    pub fn build(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut init = |key: String, spec: &ConvSpec, zero: bool, rng: &mut ChaCha8Rng| {
            let shape = spec.weight_shape(false, false);
            let bound = 1.0 / ((spec.in_channels * spec.kernel_volume()) as f64).sqrt();
            let w = if zero {
                Tensor::zeros(&shape)
            } else {
                Tensor::from_fn(&shape, |_| rng.random_range(-bound..bound))
            };
            params.insert(format!("{key}.weight"), w);
            params.insert(format!("{key}.bias"), Tensor::zeros(&[spec.out_channels]));
        };
        for b in 0..config.scales {
            for l in 0..config.layers_per_block {
                init(layer_key(b, l), &config.layer_spec(b, l), false, &mut rng);
            }
        }
        init(HEAD_KEY.into(), &config.head_spec(), config.zero_head, &mut rng);
        Ok(Discriminator { config, params })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamStore) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Contract("discriminator parameter count mismatch".into()));
        }
        for (k, v) in &self.params {
            match params.get(k) {
                Some(p) if p.shape() == v.shape() => {}
                _ => return Err(Error::Contract(format!("discriminator parameter `{k}` missing or misshaped"))),
            }
        }
        self.params = params;
        Ok(())
    }

    /// `[x, S₂(x), S₄(x), …]` with as many entries as scales.
    pub fn scale_inputs(&self, tape: &mut Tape, x: Var) -> Result<Vec<Var>> {
        let mut out = vec![x];
        for i in 1..self.config.scales {
            out.push(tape.bicubic(x, 1 << i, Direction::Down)?);
        }
        Ok(out)
    }

    fn param(&self, tape: &mut Tape, key: &str) -> Var {
        tape.leaf(key, self.params[key].clone())
    }

    /// Per-item pre-sigmoid scores, shape `[N, 1, 1, 1]`.
    pub fn score(&self, tape: &mut Tape, scales: &[Var]) -> Result<Var> {
        if scales.len() != self.config.scales {
            return Err(Error::dim("discriminator scales", self.config.scales, scales.len()));
        }
        let mut h: Option<Var> = None;
        for (b, &s) in scales.iter().enumerate() {
            let features = vnsc_var(tape, s, &self.config.vnsc)?;
            let mut x = match h {
                None => features,
                Some(prev) => {
                    let (ps, fs) = (tape.value(prev).shape(), tape.value(features).shape());
                    if ps[0] != fs[0] || ps[2..] != fs[2..] {
                        return Err(Error::Shape(format!(
                            "scale {b} has shape {:?} but the previous block produced {:?}",
                            fs, ps
                        )));
                    }
                    tape.concat(&[prev, features])?
                }
            };
            for l in 0..self.config.layers_per_block {
                let key = layer_key(b, l);
                let w = self.param(tape, &format!("{key}.weight"));
                let bias = self.param(tape, &format!("{key}.bias"));
                let y = tape.conv(x, w, bias, &self.config.layer_spec(b, l))?;
                x = tape.relu(y);
            }
            h = Some(x);
        }
        let w = self.param(tape, &format!("{HEAD_KEY}.weight"));
        let bias = self.param(tape, &format!("{HEAD_KEY}.bias"));
        let c = tape.conv(h.expect("scales >= 1"), w, bias, &self.config.head_spec())?;
        tape.spatial_mean(c)
    }

    /// Scores a full-resolution batch, building its scale pyramid first.
    pub fn score_image(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let scales = self.scale_inputs(tape, x)?;
        self.score(tape, &scales)
    }

    /// Per-item scores of a full-resolution batch.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let c = self.score_image(&mut tape, v)?;
        Ok(tape.value(c).data().to_vec())
    }
}
