//! Fidelity metrics on the luminance channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perceptual::luminance_bt609;
use crate::tensor::{gaussian_kernel_1d, Tensor};

const PEAK: f64 = 255.0;

fn check_pair(a: &Tensor, b: &Tensor) -> Result<()> {
    a.check_same_shape(b)?;
    if a.ndim() != 4 {
        return Err(Error::Shape(format!("expected [N, C, H, W] images, got {:?}", a.shape())));
    }
    Ok(())
}

/// Luminance of both images with `border` pixels removed on every side.
fn cropped_luma(a: &Tensor, b: &Tensor, border: usize) -> Result<(Tensor, Tensor)> {
    check_pair(a, b)?;
    let s = a.shape();
    let (h, w) = (s[2], s[3]);
    if 2 * border >= h || 2 * border >= w {
        return Err(Error::Shape(format!("border crop {border} leaves nothing of {h}×{w}")));
    }
    let origin = [0, 0, border, border];
    let size = [s[0], 1, h - 2 * border, w - 2 * border];
    let ya = luminance_bt609(a)?.crop(&origin, &size)?;
    let yb = luminance_bt609(b)?.crop(&origin, &size)?;
    Ok((ya, yb))
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.len() as f64)
}

pub fn rmse(a: &Tensor, b: &Tensor) -> Result<f64> {
    Ok(mse(a, b)?.sqrt())
}

pub fn l1(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / a.len() as f64)
}

/// `10·log10(255² / MSE)` on luminance; `+∞` for identical images.
pub fn psnr_y(a: &Tensor, b: &Tensor, border_crop: usize) -> Result<f64> {
    let (ya, yb) = cropped_luma(a, b, border_crop)?;
    let m = mse(&ya, &yb)?;
    Ok(if m == 0.0 { f64::INFINITY } else { 10.0 * (PEAK * PEAK / m).log10() })
}

/// Valid-region separable filtering of each `[H, W]` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut tmp = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            tmp[i * ow + j] = (0..n).map(|t| k[t] * x[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..n).map(|t| k[t] * tmp[(i + t) * ow + j]).sum();
        }
    }
    (out, oh, ow)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

/// Mean Gaussian-weighted SSIM on luminance over the valid region.
pub fn ssim_y(a: &Tensor, b: &Tensor, border_crop: usize) -> Result<f64> {
    ssim_y_with(a, b, border_crop, &SsimParams::default())
}

pub fn ssim_y_with(a: &Tensor, b: &Tensor, border_crop: usize, p: &SsimParams) -> Result<f64> {
    let (ya, yb) = cropped_luma(a, b, border_crop)?;
    let s = ya.shape();
    let (n, h, w) = (s[0], s[2], s[3]);
    if h < p.window || w < p.window {
        return Err(Error::Shape(format!("SSIM window {} exceeds the {h}×{w} image", p.window)));
    }
    let k = gaussian_kernel_1d(p.window, p.sigma)?;
    let c1 = (p.k1 * PEAK).powi(2);
    let c2 = (p.k2 * PEAK).powi(2);
    let plane = h * w;
    let mut total = 0.0;
    let mut count = 0usize;
    for item in 0..n {
        let xa = &ya.data()[item * plane..(item + 1) * plane];
        let xb = &yb.data()[item * plane..(item + 1) * plane];
        let sq = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| x * y).collect() };
        let (ma, _, _) = filter_valid(xa, h, w, &k);
        let (mb, _, _) = filter_valid(xb, h, w, &k);
        let (maa, _, _) = filter_valid(&sq(xa, xa), h, w, &k);
        let (mbb, _, _) = filter_valid(&sq(xb, xb), h, w, &k);
        let (mab, _, _) = filter_valid(&sq(xa, xb), h, w, &k);
        for i in 0..ma.len() {
            let (ua, ub) = (ma[i], mb[i]);
            let va = maa[i] - ua * ua;
            let vb = mbb[i] - ub * ub;
            let cov = mab[i] - ua * ub;
            let num = (2.0 * ua * ub + c1) * (2.0 * cov + c2);
            let den = (ua * ua + ub * ub + c1) * (va + vb + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Per-image fidelity record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    /// `None` stands for identical images (infinite PSNR).
    pub psnr_y: Option<f64>,
    pub ssim_y: f64,
    pub rmse: f64,
    pub l1: f64,
}

impl MetricReport {
    pub fn compute(name: impl Into<String>, a: &Tensor, b: &Tensor, border_crop: usize) -> Result<Self> {
        let psnr = psnr_y(a, b, border_crop)?;
        Ok(MetricReport {
            name: name.into(),
            psnr_y: psnr.is_finite().then_some(psnr),
            ssim_y: ssim_y(a, b, border_crop)?,
            rmse: rmse(a, b)?,
            l1: l1(a, b)?,
        })
    }

    pub fn psnr(&self) -> f64 {
        self.psnr_y.unwrap_or(f64::INFINITY)
    }

    /// Human-readable single line.
    pub fn to_line(&self) -> String {
        format!(
            "{}: psnr_y={:.4} dB ssim_y={:.5} rmse={:.5} l1={:.5}",
            self.name,
            self.psnr(),
            self.ssim_y,
            self.rmse,
            self.l1
        )
    }

    /// Machine-readable single-line JSON record.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
