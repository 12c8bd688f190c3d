use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{gaussian_kernel_1d, AxisMap, Tensor};

/// RGB → luminance weights.
pub const BT609: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnscConfig {
    pub kernel_size: usize,
    pub sigma: f64,
    /// Shifts run over `−range..=range` on both axes.
    pub shift_range: usize,
}

impl Default for VnscConfig {
    fn default() -> Self {
        VnscConfig {
            kernel_size: 7,
            sigma: 1.17,
            shift_range: 3,
        }
    }
}

impl VnscConfig {
    pub fn channels(&self) -> usize {
        (2 * self.shift_range + 1).pow(2)
    }

    /// Output channel of the `(p, q)` shift product.
    pub fn channel_of(&self, p: isize, q: isize) -> usize {
        let r = self.shift_range as isize;
        ((2 * r + 1) * (p + r) + (q + r)) as usize
    }
}

pub fn luminance_var(tape: &mut Tape, rgb: Var) -> Result<Var> {
    let c = tape.value(rgb).shape().get(1).copied().unwrap_or(0);
    if c != 3 {
        return Err(Error::dim("channels", 3, c));
    }
    tape.axis_map(rgb, 1, Arc::new(AxisMap::dense(&[BT609.to_vec()])?))
}

/// `x − G∗x` along one spatial axis, accumulated from differences so a
/// constant signal gives exact zeros.
fn local_difference(tape: &mut Tape, x: Var, axis_is_h: bool, kernel: &[f64]) -> Result<Var> {
    let r = (kernel.len() / 2) as isize;
    let mut acc: Option<Var> = None;
    for (t, &w) in kernel.iter().enumerate() {
        let off = t as isize - r;
        if off == 0 {
            continue;
        }
        let shifted = if axis_is_h { tape.shift(x, off, 0)? } else { tape.shift(x, 0, off)? };
        let d = tape.sub(x, shifted)?;
        let d = tape.scale(d, w);
        acc = Some(match acc {
            None => d,
            Some(a) => tape.add(a, d)?,
        });
    }
    Ok(acc.unwrap_or_else(|| tape.scale(x, 0.0)))
}

/// `Î = (I − μ)/(σ + 1)` with Gaussian local statistics and
/// `σ² = max(μ(I²) − μ(I)², 0)`.
pub fn variance_normalize_var(tape: &mut Tape, lum: Var, cfg: &VnscConfig) -> Result<Var> {
    let kernel = gaussian_kernel_1d(cfg.kernel_size, cfg.sigma)?;
    let mean = tape.gaussian_blur(lum, cfg.kernel_size, cfg.sigma)?;
    let sq = tape.mul(lum, lum)?;
    let mean_sq = tape.gaussian_blur(sq, cfg.kernel_size, cfg.sigma)?;
    let mean2 = tape.mul(mean, mean)?;
    let var = tape.sub(mean_sq, mean2)?;
    let var = tape.relu(var);
    let sigma = tape.sqrt(var);
    let denom = tape.add_scalar(sigma, 1.0);
    // I − G∗I = (I − g_h∗I) + g_h∗(I − g_w∗I)
    let dh = local_difference(tape, lum, true, &kernel)?;
    let dw = local_difference(tape, lum, false, &kernel)?;
    let nd = tape.value(lum).ndim();
    let len = tape.value(lum).shape()[nd - 2];
    let dw = tape.axis_map(dw, nd - 2, Arc::new(AxisMap::gaussian(len, cfg.kernel_size, cfg.sigma)?))?;
    let centered = tape.add(dh, dw)?;
    tape.div(centered, denom)
}

/// Luminance, variance normalization, then the `(2r+1)²` shift products
/// `Î(i, j)·Î(i + p, j + q)` with replicate borders.
pub fn vnsc_var(tape: &mut Tape, rgb: Var, cfg: &VnscConfig) -> Result<Var> {
    let lum = luminance_var(tape, rgb)?;
    let vn = variance_normalize_var(tape, lum, cfg)?;
    let r = cfg.shift_range as isize;
    let mut channels = Vec::with_capacity(cfg.channels());
    for p in -r..=r {
        for q in -r..=r {
            let s = tape.shift(vn, p, q)?;
            channels.push(tape.mul(vn, s)?);
        }
    }
    tape.concat(&channels)
}

fn eval(x: &Tensor, f: impl FnOnce(&mut Tape, Var) -> Result<Var>) -> Result<Tensor> {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let out = f(&mut tape, v)?;
    Ok(tape.value(out).clone())
}

pub fn luminance_bt609(rgb: &Tensor) -> Result<Tensor> {
    eval(rgb, luminance_var)
}

pub fn variance_normalize(lum: &Tensor, cfg: &VnscConfig) -> Result<Tensor> {
    eval(lum, |t, v| variance_normalize_var(t, v, cfg))
}

pub fn vnsc(rgb: &Tensor, cfg: &VnscConfig) -> Result<Tensor> {
    eval(rgb, |t, v| vnsc_var(t, v, cfg))
}
