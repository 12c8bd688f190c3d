//! Strided convolution and its transpose via im2col + GEMM.
//!
//! Convolution uses the cross-correlation convention: the kernel is not
//! flipped. `conv_transposed` with the same geometry is the exact matrix
//! adjoint of `conv`, which pins its convention.

use super::Tensor;
use crate::error::{Error, Result};

/// Geometry of a convolution layer. Axes are ordered `(time, height, width)`;
/// 2-D layers keep the time entries at kernel 1, stride 1, padding 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl ConvSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        pad: [usize; 3],
    ) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    /// Square 2-D layer.
    pub fn square(in_channels: usize, out_channels: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self::new(in_channels, out_channels, [1, k, k], [1, stride, stride], [0, pad, pad])
    }

    /// Same geometry with input and output channels swapped: the ConvSpec of the
    /// transposed layer that is this layer's adjoint.
    pub fn transposed(&self) -> Self {
        ConvSpec {
            in_channels: self.out_channels,
            out_channels: self.in_channels,
            ..*self
        }
    }

    pub fn kernel_volume(&self) -> usize {
        self.kernel.iter().product()
    }

    pub fn is_2d(&self) -> bool {
        self.kernel[0] == 1 && self.stride[0] == 1 && self.pad[0] == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidSpec("channel counts must be >= 1".into()));
        }
        if self.kernel.contains(&0) {
            return Err(Error::InvalidSpec(format!("kernel sizes must be >= 1, got {:?}", self.kernel)));
        }
        if self.stride.contains(&0) {
            return Err(Error::InvalidSpec(format!("strides must be >= 1, got {:?}", self.stride)));
        }
        Ok(())
    }

    /// `floor((in + 2·pad − kernel)/stride) + 1` per axis.
    pub fn output_extent(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        self.validate()?;
        let mut out = [0; 3];
        for a in 0..3 {
            let padded = input[a] + 2 * self.pad[a];
            if padded < self.kernel[a] {
                return Err(Error::InvalidSpec(format!(
                    "non-positive output extent on {}: input {} + 2·pad {} < kernel {}",
                    AXES[a], input[a], self.pad[a], self.kernel[a]
                )));
            }
            out[a] = (padded - self.kernel[a]) / self.stride[a] + 1;
        }
        Ok(out)
    }

    /// `(in − 1)·stride − 2·pad + kernel` per axis.
    pub fn transposed_output_extent(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        self.validate()?;
        let mut out = [0; 3];
        for a in 0..3 {
            let full = (input[a] - 1) * self.stride[a] + self.kernel[a];
            if full <= 2 * self.pad[a] {
                return Err(Error::InvalidSpec(format!(
                    "non-positive transposed output extent on {}: {} − 2·{}",
                    AXES[a], full, self.pad[a]
                )));
            }
            out[a] = full - 2 * self.pad[a];
        }
        Ok(out)
    }

    /// Weight shape: `[out, in, k…]` for a convolution, `[in, out, k…]` for a
    /// transposed convolution (the same tensor serves a layer and its adjoint).
    pub fn weight_shape(&self, cube: bool, transposed: bool) -> Vec<usize> {
        let (a, b) = if transposed {
            (self.in_channels, self.out_channels)
        } else {
            (self.out_channels, self.in_channels)
        };
        let mut s = vec![a, b];
        if cube {
            s.push(self.kernel[0]);
        }
        s.extend_from_slice(&self.kernel[1..]);
        s
    }
}

const AXES: [&str; 3] = ["time", "height", "width"];

/// Shared window geometry between a large grid and a small (strided) grid.
#[derive(Clone, Copy)]
struct Geometry {
    big: [usize; 3],
    small: [usize; 3],
    kernel: [usize; 3],
    stride: [usize; 3],
    pad: [usize; 3],
}

impl Geometry {
    fn big_len(&self) -> usize {
        self.big.iter().product()
    }
    fn small_len(&self) -> usize {
        self.small.iter().product()
    }
    fn kvol(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Calls `f(col_index_in_row, big_index)` for each in-range tap of kernel
    /// offset `(a, b, d)`.
    #[inline]
    fn for_each_tap(&self, a: usize, b: usize, d: usize, mut f: impl FnMut(usize, usize)) {
        let [so, ho, wo] = self.small;
        let [bt, bh, bw] = self.big;
        for ot in 0..so {
            let it = (ot * self.stride[0] + a) as isize - self.pad[0] as isize;
            if it < 0 || it >= bt as isize {
                continue;
            }
            for oh in 0..ho {
                let ih = (oh * self.stride[1] + b) as isize - self.pad[1] as isize;
                if ih < 0 || ih >= bh as isize {
                    continue;
                }
                let row_col = (ot * ho + oh) * wo;
                let row_big = (it as usize * bh + ih as usize) * bw;
                for ow in 0..wo {
                    let iw = (ow * self.stride[2] + d) as isize - self.pad[2] as isize;
                    if iw < 0 || iw >= bw as isize {
                        continue;
                    }
                    f(row_col + ow, row_big + iw as usize);
                }
            }
        }
    }

    /// `x: [c, big]` → `cols: [c·kvol, small]`.
    fn im2col(&self, x: &[f64], channels: usize, cols: &mut [f64]) {
        let p = self.small_len();
        let bl = self.big_len();
        cols.iter_mut().for_each(|v| *v = 0.0);
        let [kt, kh, kw] = self.kernel;
        for c in 0..channels {
            let xc = &x[c * bl..(c + 1) * bl];
            for a in 0..kt {
                for b in 0..kh {
                    for d in 0..kw {
                        let row = ((c * kt + a) * kh + b) * kw + d;
                        let dst = &mut cols[row * p..(row + 1) * p];
                        self.for_each_tap(a, b, d, |j, i| dst[j] = xc[i]);
                    }
                }
            }
        }
    }

    /// Scatter-add `cols: [c·kvol, small]` into `x: [c, big]`.
    fn col2im(&self, cols: &[f64], channels: usize, x: &mut [f64]) {
        let p = self.small_len();
        let bl = self.big_len();
        let [kt, kh, kw] = self.kernel;
        for c in 0..channels {
            let xc = &mut x[c * bl..(c + 1) * bl];
            for a in 0..kt {
                for b in 0..kh {
                    for d in 0..kw {
                        let row = ((c * kt + a) * kh + b) * kw + d;
                        let src = &cols[row * p..(row + 1) * p];
                        self.for_each_tap(a, b, d, |j, i| xc[i] += src[j]);
                    }
                }
            }
        }
    }
}

/// `c[m×n] = alpha·op(a)·op(b) + beta·c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: all slices are sized by the callers for the given strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_input(x: &Tensor, spec: &ConvSpec) -> Result<[usize; 5]> {
    spec.validate()?;
    let dims = x.dims5()?;
    if !x.is_cube() && !spec.is_2d() {
        return Err(Error::InvalidSpec(
            "image tensors need time kernel 1, stride 1, padding 0".into(),
        ));
    }
    if dims[1] != spec.in_channels {
        return Err(Error::dim("channels", spec.in_channels, dims[1]));
    }
    Ok(dims)
}

fn check_params(x: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec, transposed: bool) -> Result<()> {
    let expected = spec.weight_shape(x.is_cube(), transposed);
    if weights.shape() != expected.as_slice() {
        if weights.ndim() != expected.len() {
            return Err(Error::dim("weight ndim", expected.len(), weights.ndim()));
        }
        for (axis, (&e, &g)) in expected.iter().zip(weights.shape()).enumerate() {
            if e != g {
                return Err(Error::dim(format!("weight axis {axis}"), e, g));
            }
        }
    }
    if bias.shape() != [spec.out_channels] {
        return Err(Error::dim("bias", spec.out_channels, bias.len()));
    }
    Ok(())
}

fn out_shape(x: &Tensor, n: usize, c: usize, ext: [usize; 3]) -> Vec<usize> {
    if x.is_cube() {
        vec![n, c, ext[0], ext[1], ext[2]]
    } else {
        vec![n, c, ext[1], ext[2]]
    }
}

/// Strided convolution (cross-correlation, no kernel flip).
///
/// `weights` is `[out, in, (kt,) kh, kw]`, `bias` is `[out]`.
pub fn conv(x: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let [n, cin, t, h, w] = check_input(x, spec)?;
    check_params(x, weights, bias, spec, false)?;
    let small = spec.output_extent([t, h, w])?;
    let g = Geometry {
        big: [t, h, w],
        small,
        kernel: spec.kernel,
        stride: spec.stride,
        pad: spec.pad,
    };
    let cout = spec.out_channels;
    let k = cin * g.kvol();
    let p = g.small_len();
    let mut out = vec![0.0; n * cout * p];
    let mut cols = vec![0.0; k * p];
    for b in 0..n {
        let xb = &x.data()[b * cin * g.big_len()..(b + 1) * cin * g.big_len()];
        g.im2col(xb, cin, &mut cols);
        let ob = &mut out[b * cout * p..(b + 1) * cout * p];
        for (o, chunk) in ob.chunks_mut(p).enumerate() {
            chunk.iter_mut().for_each(|v| *v = bias.data()[o]);
        }
        gemm(cout, k, p, weights.data(), (k, 1), &cols, (p, 1), 1.0, ob);
    }
    Tensor::new(out_shape(x, n, cout, small), out)
}

/// Strided transposed convolution: upsample by inserting zeros, then filter.
///
/// `weights` is `[in, out, (kt,) kh, kw]`; with bias zero this is the adjoint
/// of [`conv`] under `spec.transposed()` and the same weight tensor.
pub fn conv_transposed(x: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let [n, cin, t, h, w] = check_input(x, spec)?;
    check_params(x, weights, bias, spec, true)?;
    let big = spec.transposed_output_extent([t, h, w])?;
    let g = Geometry {
        big,
        small: [t, h, w],
        kernel: spec.kernel,
        stride: spec.stride,
        pad: spec.pad,
    };
    let cout = spec.out_channels;
    let k = cout * g.kvol();
    let p = g.small_len();
    let bl = g.big_len();
    let mut out = vec![0.0; n * cout * bl];
    let mut cols = vec![0.0; k * p];
    for b in 0..n {
        let xb = &x.data()[b * cin * p..(b + 1) * cin * p];
        // cols[k×p] = Wᵀ[k×cin] · x[cin×p]
        gemm(k, cin, p, weights.data(), (1, k), xb, (p, 1), 0.0, &mut cols);
        let ob = &mut out[b * cout * bl..(b + 1) * cout * bl];
        for (o, chunk) in ob.chunks_mut(bl).enumerate() {
            chunk.iter_mut().for_each(|v| *v = bias.data()[o]);
        }
        g.col2im(&cols, cout, ob);
    }
    Tensor::new(out_shape(x, n, cout, big), out)
}

pub(crate) struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Reverse-mode rule for [`conv`].
pub(crate) fn conv_backward(x: &Tensor, weights: &Tensor, spec: &ConvSpec, dy: &Tensor) -> Result<ConvGrads> {
    let [n, cin, t, h, w] = x.dims5()?;
    let small = spec.output_extent([t, h, w])?;
    let g = Geometry {
        big: [t, h, w],
        small,
        kernel: spec.kernel,
        stride: spec.stride,
        pad: spec.pad,
    };
    let cout = spec.out_channels;
    let k = cin * g.kvol();
    let p = g.small_len();
    let bl = g.big_len();
    let mut dx = vec![0.0; n * cin * bl];
    let mut dw = vec![0.0; cout * k];
    let mut db = vec![0.0; cout];
    let mut cols = vec![0.0; k * p];
    for b in 0..n {
        let dyb = &dy.data()[b * cout * p..(b + 1) * cout * p];
        for (o, chunk) in dyb.chunks(p).enumerate() {
            db[o] += chunk.iter().sum::<f64>();
        }
        let xb = &x.data()[b * cin * bl..(b + 1) * cin * bl];
        g.im2col(xb, cin, &mut cols);
        // dW[cout×k] += dy[cout×p] · colsᵀ[p×k]
        gemm(cout, p, k, dyb, (p, 1), &cols, (1, p), 1.0, &mut dw);
        // dcols[k×p] = Wᵀ[k×cout] · dy[cout×p]
        gemm(k, cout, p, weights.data(), (1, k), dyb, (p, 1), 0.0, &mut cols);
        g.col2im(&cols, cin, &mut dx[b * cin * bl..(b + 1) * cin * bl]);
    }
    Ok(ConvGrads {
        input: Tensor::new(x.shape().to_vec(), dx)?,
        weights: Tensor::new(weights.shape().to_vec(), dw)?,
        bias: Tensor::new(vec![cout], db)?,
    })
}

/// Reverse-mode rule for [`conv_transposed`].
pub(crate) fn conv_transposed_backward(
    x: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
    dy: &Tensor,
) -> Result<ConvGrads> {
    let [n, cin, t, h, w] = x.dims5()?;
    let big = spec.transposed_output_extent([t, h, w])?;
    let g = Geometry {
        big,
        small: [t, h, w],
        kernel: spec.kernel,
        stride: spec.stride,
        pad: spec.pad,
    };
    let cout = spec.out_channels;
    let k = cout * g.kvol();
    let p = g.small_len();
    let bl = g.big_len();
    let mut dx = vec![0.0; n * cin * p];
    let mut dw = vec![0.0; cin * k];
    let mut db = vec![0.0; cout];
    let mut cols = vec![0.0; k * p];
    for b in 0..n {
        let dyb = &dy.data()[b * cout * bl..(b + 1) * cout * bl];
        for (o, chunk) in dyb.chunks(bl).enumerate() {
            db[o] += chunk.iter().sum::<f64>();
        }
        g.im2col(dyb, cout, &mut cols);
        let xb = &x.data()[b * cin * p..(b + 1) * cin * p];
        // dx[cin×p] = W[cin×k] · dcols[k×p]
        gemm(cin, k, p, weights.data(), (k, 1), &cols, (p, 1), 0.0, &mut dx[b * cin * p..(b + 1) * cin * p]);
        // dW[cin×k] += x[cin×p] · dcolsᵀ[p×k]
        gemm(cin, p, k, xb, (p, 1), &cols, (1, p), 1.0, &mut dw);
    }
    Ok(ConvGrads {
        input: Tensor::new(x.shape().to_vec(), dx)?,
        weights: Tensor::new(weights.shape().to_vec(), dw)?,
        bias: Tensor::new(vec![cout], db)?,
    })
}
