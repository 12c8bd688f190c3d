use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::metrics;
use crate::perceptual::{luminance_bt609, variance_normalize, VnscConfig};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub l1: f64,
    pub l2: f64,
    pub rmse: f64,
    /// `None` when output and reference are identical.
    pub psnr_y: Option<f64>,
    /// Mean `|Î|` of the output's variance-normalized luminance.
    pub vn_mean_abs: f64,
    pub vn_std: f64,
}

/// Variance-normalized luminance statistics `(mean |Î|, std Î)`.
pub fn vn_statistics(rgb: &Tensor) -> Result<(f64, f64)> {
    let vn = variance_normalize(&luminance_bt609(rgb)?, &VnscConfig::default())?;
    let n = vn.len() as f64;
    let mean_abs = vn.data().iter().map(|v| v.abs()).sum::<f64>() / n;
    let mean = vn.mean();
    let var = vn.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean_abs, var.sqrt()))
}

/// Evaluates the generator at each amplitude with one fixed noise seed, so
/// only the amplitude changes between rows.
pub fn sweep_noise(
    graph: &NetworkGraph,
    input: &Tensor,
    reference: &Tensor,
    amplitudes: &[f64],
    seed: u64,
    border_crop: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &w in amplitudes {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Config(format!("noise amplitude must be finite and >= 0, got {w}")));
        }
        let y = graph.forward(input, seed, w)?;
        let psnr = metrics::psnr_y(&y, reference, border_crop)?;
        let (vn_mean_abs, vn_std) = vn_statistics(&y)?;
        let l2 = metrics::mse(&y, reference)?;
        rows.push(SweepRow {
            amplitude: w,
            l1: metrics::l1(&y, reference)?,
            l2,
            rmse: l2.sqrt(),
            psnr_y: psnr.is_finite().then_some(psnr),
            vn_mean_abs,
            vn_std,
        });
    }
    Ok(rows)
}
