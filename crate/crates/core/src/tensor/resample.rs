//! Fixed linear maps applied along one tensor axis: bicubic resampling,
//! Gaussian blur, replicate-border shifts and channel mixing. Each map knows
//! its own adjoint, which is all reverse-mode differentiation needs.

use std::sync::Arc;

use super::Tensor;
use crate::error::{Error, Result};

/// Sparse linear map from an axis of length `in_len` to one of `out_len`.
/// Border handling is baked into the taps (indices are already clamped).
#[derive(Clone, Debug, PartialEq)]
pub struct AxisMap {
    in_len: usize,
    out_len: usize,
    taps: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Catmull-Rom cubic (a = −0.5).
fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let ax = x.abs();
    if ax <= 1.0 {
        ((A + 2.0) * ax - (A + 3.0)) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((A * ax - 5.0 * A) * ax + 8.0 * A) * ax - 4.0 * A
    } else {
        0.0
    }
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Accumulates a tap, merging duplicates produced by border clamping.
fn push_tap(row: &mut Vec<(usize, f64)>, idx: usize, w: f64) {
    if let Some(slot) = row.iter_mut().find(|(i, _)| *i == idx) {
        slot.1 += w;
    } else {
        row.push((idx, w));
    }
}

impl AxisMap {
    pub fn from_taps(in_len: usize, taps: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if taps.is_empty() || in_len == 0 {
            return Err(Error::InvalidSpec("axis map needs non-empty input and output".into()));
        }
        if taps.iter().flatten().any(|&(i, _)| i >= in_len) {
            return Err(Error::Bounds("axis map tap outside input".into()));
        }
        Ok(AxisMap {
            in_len,
            out_len: taps.len(),
            taps,
        })
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn taps(&self) -> &[Vec<(usize, f64)>] {
        &self.taps
    }

    /// Bicubic resampling by an integer factor. Downscaling widens the kernel
    /// by the factor (antialiasing) before subsampling; weights are normalized
    /// per output sample and borders replicate.
    pub fn bicubic(in_len: usize, factor: usize, dir: Direction) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidSpec("resize factor must be positive".into()));
        }
        let (out_len, scale) = match dir {
            Direction::Up => (in_len * factor, factor as f64),
            Direction::Down => (in_len / factor, 1.0 / factor as f64),
        };
        if out_len == 0 {
            return Err(Error::InvalidSpec(format!(
                "resizing extent {in_len} down by {factor} leaves nothing"
            )));
        }
        let (kscale, width) = if scale < 1.0 { (scale, 4.0 / scale) } else { (1.0, 4.0) };
        let taps = (0..out_len)
            .map(|u| {
                let center = (u as f64 + 0.5) / scale - 0.5;
                let left = (center - width / 2.0).floor() as isize;
                let span = width.ceil() as isize + 2;
                let mut row = Vec::new();
                let mut total = 0.0;
                for i in left..left + span {
                    let w = kscale * cubic(kscale * (center - i as f64));
                    if w != 0.0 {
                        push_tap(&mut row, clamp_index(i, in_len), w);
                        total += w;
                    }
                }
                row.iter_mut().for_each(|(_, w)| *w /= total);
                row
            })
            .collect();
        Self::from_taps(in_len, taps)
    }

    /// Normalized Gaussian of odd support with replicate borders.
    pub fn gaussian(len: usize, kernel_size: usize, sigma: f64) -> Result<Self> {
        let k = gaussian_kernel_1d(kernel_size, sigma)?;
        let r = (kernel_size / 2) as isize;
        let taps = (0..len as isize)
            .map(|j| {
                let mut row = Vec::with_capacity(kernel_size);
                for (t, &w) in k.iter().enumerate() {
                    push_tap(&mut row, clamp_index(j + t as isize - r, len), w);
                }
                row
            })
            .collect();
        Self::from_taps(len, taps)
    }

    /// `out[j] = in[clamp(j + offset)]`.
    pub fn shift(len: usize, offset: isize) -> Self {
        let taps = (0..len as isize)
            .map(|j| vec![(clamp_index(j + offset, len), 1.0)])
            .collect();
        AxisMap {
            in_len: len,
            out_len: len,
            taps,
        }
    }

    /// Dense mixing matrix `rows[out][in]`.
    pub fn dense(rows: &[Vec<f64>]) -> Result<Self> {
        let in_len = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != in_len) {
            return Err(Error::InvalidSpec("ragged mixing matrix".into()));
        }
        let taps = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect())
            .collect();
        Self::from_taps(in_len, taps)
    }

    fn split(shape: &[usize], axis: usize) -> (usize, usize) {
        let outer = shape[..axis].iter().product();
        let inner = shape[axis + 1..].iter().product();
        (outer, inner)
    }

    /// Applies the map along `axis`.
    pub fn apply(&self, x: &Tensor, axis: usize) -> Result<Tensor> {
        let shape = x.shape();
        if axis >= shape.len() {
            return Err(Error::Bounds(format!("axis {axis} of rank-{} tensor", shape.len())));
        }
        if shape[axis] != self.in_len {
            return Err(Error::dim(super::axis_name(shape.len(), axis), self.in_len, shape[axis]));
        }
        let (outer, inner) = Self::split(shape, axis);
        let mut out = vec![0.0; outer * self.out_len * inner];
        let src = x.data();
        for o in 0..outer {
            let sblock = &src[o * self.in_len * inner..(o + 1) * self.in_len * inner];
            let dblock = &mut out[o * self.out_len * inner..(o + 1) * self.out_len * inner];
            for (j, row) in self.taps.iter().enumerate() {
                let dst = &mut dblock[j * inner..(j + 1) * inner];
                for &(i, w) in row {
                    let s = &sblock[i * inner..(i + 1) * inner];
                    for (d, v) in dst.iter_mut().zip(s) {
                        *d += w * v;
                    }
                }
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = self.out_len;
        Tensor::new(out_shape, out)
    }

    /// Applies the transposed map along `axis`.
    pub fn apply_adjoint(&self, y: &Tensor, axis: usize) -> Result<Tensor> {
        let shape = y.shape();
        if axis >= shape.len() || shape[axis] != self.out_len {
            return Err(Error::dim(
                super::axis_name(shape.len(), axis),
                self.out_len,
                shape.get(axis).copied().unwrap_or(0),
            ));
        }
        let (outer, inner) = Self::split(shape, axis);
        let mut out = vec![0.0; outer * self.in_len * inner];
        let src = y.data();
        for o in 0..outer {
            let sblock = &src[o * self.out_len * inner..(o + 1) * self.out_len * inner];
            let dblock = &mut out[o * self.in_len * inner..(o + 1) * self.in_len * inner];
            for (j, row) in self.taps.iter().enumerate() {
                let s = &sblock[j * inner..(j + 1) * inner];
                for &(i, w) in row {
                    let dst = &mut dblock[i * inner..(i + 1) * inner];
                    for (d, v) in dst.iter_mut().zip(s) {
                        *d += w * v;
                    }
                }
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = self.in_len;
        Tensor::new(out_shape, out)
    }
}

/// Normalized 1-D Gaussian weights over an odd support.
pub fn gaussian_kernel_1d(kernel_size: usize, sigma: f64) -> Result<Vec<f64>> {
    if kernel_size.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!("gaussian kernel size must be odd, got {kernel_size}")));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidSpec(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = (kernel_size / 2) as f64;
    let raw: Vec<f64> = (0..kernel_size)
        .map(|t| {
            let d = t as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

pub(crate) fn spatial_axes(x: &Tensor) -> Result<(usize, usize)> {
    let nd = x.ndim();
    if nd < 2 {
        return Err(Error::Shape(format!("need two spatial axes, got shape {:?}", x.shape())));
    }
    Ok((nd - 2, nd - 1))
}

/// The pair of per-axis maps a 2-D spatial resize applies.
pub(crate) fn bicubic_maps(x: &Tensor, factor: usize, dir: Direction) -> Result<[(usize, Arc<AxisMap>); 2]> {
    let (ha, wa) = spatial_axes(x)?;
    let hm = AxisMap::bicubic(x.shape()[ha], factor, dir)?;
    let wm = AxisMap::bicubic(x.shape()[wa], factor, dir)?;
    Ok([(ha, Arc::new(hm)), (wa, Arc::new(wm))])
}

pub(crate) fn gaussian_maps(x: &Tensor, kernel_size: usize, sigma: f64) -> Result<[(usize, Arc<AxisMap>); 2]> {
    let (ha, wa) = spatial_axes(x)?;
    let hm = AxisMap::gaussian(x.shape()[ha], kernel_size, sigma)?;
    let wm = AxisMap::gaussian(x.shape()[wa], kernel_size, sigma)?;
    Ok([(ha, Arc::new(hm)), (wa, Arc::new(wm))])
}

/// Bicubic resize of the two trailing (spatial) axes by an integer factor.
/// Time and channel axes are untouched.
pub fn bicubic_resize(x: &Tensor, factor: usize, dir: Direction) -> Result<Tensor> {
    let [(ha, hm), (wa, wm)] = bicubic_maps(x, factor, dir)?;
    wm.apply(&hm.apply(x, ha)?, wa)
}

/// Separable normalized Gaussian blur of the spatial axes, replicate borders.
pub fn gaussian_blur(x: &Tensor, kernel_size: usize, sigma: f64) -> Result<Tensor> {
    let [(ha, hm), (wa, wm)] = gaussian_maps(x, kernel_size, sigma)?;
    wm.apply(&hm.apply(x, ha)?, wa)
}

/// `out[i, j] = x[clamp(i + dy), clamp(j + dx)]` on the spatial axes.
pub fn shift_replicate(x: &Tensor, dy: isize, dx: isize) -> Result<Tensor> {
    let (ha, wa) = spatial_axes(x)?;
    let hm = AxisMap::shift(x.shape()[ha], dy);
    let wm = AxisMap::shift(x.shape()[wa], dx);
    wm.apply(&hm.apply(x, ha)?, wa)
}

/// Mixes channels with `rows[out][in]`.
pub fn channel_mix(x: &Tensor, rows: &[Vec<f64>]) -> Result<Tensor> {
    AxisMap::dense(rows)?.apply(x, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_partition_of_unity() {
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let s: f64 = (-2..=2).map(|i| cubic(t - i as f64)).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_preserved_by_resize() {
        let x = Tensor::full(&[1, 2, 12, 12], 7.25);
        for f in [2, 3, 4] {
            for dir in [Direction::Up, Direction::Down] {
                let y = bicubic_resize(&x, f, dir).unwrap();
                assert!(y.data().iter().all(|v| (v - 7.25).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn resize_shapes() {
        let x = Tensor::zeros(&[1, 3, 48, 48]);
        assert_eq!(bicubic_resize(&x, 4, Direction::Down).unwrap().shape(), &[1, 3, 12, 12]);
        assert_eq!(bicubic_resize(&x, 2, Direction::Up).unwrap().shape(), &[1, 3, 96, 96]);
        let cube = Tensor::zeros(&[1, 3, 5, 8, 8]);
        assert_eq!(bicubic_resize(&cube, 2, Direction::Down).unwrap().shape(), &[1, 3, 5, 4, 4]);
        assert!(bicubic_resize(&Tensor::zeros(&[1, 1, 3, 3]), 4, Direction::Down).is_err());
    }

    #[test]
    fn up_down_ramp_interior() {
        // A linear ramp is reproduced exactly by both kernels away from the
        // replicate borders.
        let n = 32;
        let x = Tensor::from_fn(&[1, 1, n, n], |i| 2.0 * (i / n) as f64 + 0.5 * (i % n) as f64);
        let up = bicubic_resize(&x, 2, Direction::Up).unwrap();
        let back = bicubic_resize(&up, 2, Direction::Down).unwrap();
        let m = 4;
        let inner_a = x.crop(&[0, 0, m, m], &[1, 1, n - 2 * m, n - 2 * m]).unwrap();
        let inner_b = back.crop(&[0, 0, m, m], &[1, 1, n - 2 * m, n - 2 * m]).unwrap();
        assert!(inner_a.max_abs_diff(&inner_b).unwrap() < 1e-3);
    }

    #[test]
    fn gaussian_impulse_matches_formula() {
        let mut x = Tensor::zeros(&[1, 1, 9, 9]);
        x.data_mut()[4 * 9 + 4] = 1.0;
        let y = gaussian_blur(&x, 7, 1.17).unwrap();
        let s2 = 2.0 * 1.17f64 * 1.17;
        let total: f64 = (-3..=3)
            .flat_map(|i| (-3..=3).map(move |j| (-((i * i + j * j) as f64) / s2).exp()))
            .sum();
        assert!((y.data()[4 * 9 + 4] - 1.0 / total).abs() < 1e-15);
        assert!(gaussian_blur(&x, 6, 1.0).is_err());
    }

    #[test]
    fn gaussian_constant_and_linearity() {
        let c = Tensor::full(&[1, 1, 6, 5], 3.0);
        let y = gaussian_blur(&c, 7, 1.17).unwrap();
        assert!(y.data().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let x = Tensor::from_fn(&[1, 1, 6, 5], |i| (i as f64 * 0.7).sin());
        let a = gaussian_blur(&x.scale(3.0), 7, 1.17).unwrap();
        let b = gaussian_blur(&x, 7, 1.17).unwrap().scale(3.0);
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn adjoint_identity() {
        let m = AxisMap::bicubic(9, 3, Direction::Down).unwrap();
        let x = Tensor::from_fn(&[2, 9, 3], |i| (i as f64 * 1.3).cos());
        let y = Tensor::from_fn(&[2, 3, 3], |i| (i as f64 * 0.4).sin());
        let lhs = m.apply(&x, 1).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&m.apply_adjoint(&y, 1).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn shift_replicates_border() {
        let x = Tensor::from_fn(&[1, 1, 1, 4], |i| i as f64);
        assert_eq!(shift_replicate(&x, 0, 2).unwrap().data(), &[2.0, 3.0, 3.0, 3.0]);
        assert_eq!(shift_replicate(&x, 0, -1).unwrap().data(), &[0.0, 0.0, 1.0, 2.0]);
    }
}
