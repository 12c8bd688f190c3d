//! Dense tensors and the numeric primitives the networks are built from.
//!
//! Layout is always `(batch, channels, [time], height, width)`, row-major,
//! double precision. A 4-D tensor is treated as a 5-D one with a single frame
//! wherever an operation is defined for cubes.

mod conv;
pub mod io;
mod ops;
mod resample;

pub use conv::{conv, conv_transposed, ConvSpec};
pub(crate) use conv::{conv_backward, conv_transposed_backward};
pub(crate) use ops::{concat_many, split_channels};
pub(crate) use resample::{bicubic_maps, gaussian_maps};
pub use ops::{concat_channels, relu};
pub use resample::{
    bicubic_resize, channel_mix, gaussian_blur, gaussian_kernel_1d, shift_replicate, AxisMap,
    Direction,
};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Shape("tensor must have at least one dimension".into()));
        }
        if let Some(axis) = shape.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("dimension {axis} has size 0")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {n} elements but data has {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "invalid shape {shape:?}"
        );
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f` at each flat index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> f64) -> Self {
        let n: usize = shape.iter().product();
        let t = Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        };
        assert!(shape.iter().all(|&d| d > 0), "invalid shape {shape:?}");
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::Contract(format!(
                "expected a scalar, got shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// `(batch, channels, frames, height, width)` for 4-D and 5-D tensors.
    pub fn dims5(&self) -> Result<[usize; 5]> {
        match *self.shape.as_slice() {
            [n, c, h, w] => Ok([n, c, 1, h, w]),
            [n, c, t, h, w] => Ok([n, c, t, h, w]),
            _ => Err(Error::Shape(format!(
                "expected a 4-D image or 5-D cube tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn is_cube(&self) -> bool {
        self.shape.len() == 5
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.check_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape.len() != other.shape.len() {
            return Err(Error::dim("ndim", self.shape.len(), other.shape.len()));
        }
        for (axis, (&a, &b)) in self.shape.iter().zip(&other.shape).enumerate() {
            if a != b {
                return Err(Error::dim(axis_name(self.shape.len(), axis), a, b));
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Copies the sub-block starting at `origin` with extent `size` (any rank).
    pub fn crop(&self, origin: &[usize], size: &[usize]) -> Result<Tensor> {
        let nd = self.shape.len();
        if origin.len() != nd || size.len() != nd {
            return Err(Error::dim("ndim", nd, origin.len().min(size.len())));
        }
        for a in 0..nd {
            if origin[a] + size[a] > self.shape[a] || size[a] == 0 {
                return Err(Error::Bounds(format!(
                    "crop of axis {a}: origin {} + size {} exceeds {}",
                    origin[a], size[a], self.shape[a]
                )));
            }
        }
        let strides = strides(&self.shape);
        let mut out = Vec::with_capacity(size.iter().product());
        let mut idx = vec![0usize; nd];
        let inner = size[nd - 1];
        loop {
            let base: usize = (0..nd).map(|a| (origin[a] + idx[a]) * strides[a]).sum();
            out.extend_from_slice(&self.data[base..base + inner]);
            // advance all but the innermost axis
            let mut a = nd - 1;
            loop {
                if a == 0 {
                    return Tensor::new(size.to_vec(), out);
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < size[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Selects batch items `[start, start + count)`.
    pub fn batch_slice(&self, start: usize, count: usize) -> Result<Tensor> {
        let per: usize = self.shape[1..].iter().product();
        if count == 0 || start + count > self.shape[0] {
            return Err(Error::Bounds(format!(
                "batch slice {start}..{} of {}",
                start + count,
                self.shape[0]
            )));
        }
        let mut shape = self.shape.clone();
        shape[0] = count;
        Tensor::new(shape, self.data[start * per..(start + count) * per].to_vec())
    }

    /// Stacks tensors of identical shape along the batch axis.
    pub fn stack_batch(items: &[Tensor]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| Error::Contract("cannot stack an empty list".into()))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        let mut batch = 0;
        for t in items {
            if t.shape[1..] != first.shape[1..] {
                return Err(Error::Shape(format!(
                    "cannot stack {:?} with {:?}",
                    t.shape, first.shape
                )));
            }
            batch += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = batch;
        Tensor::new(shape, data)
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

pub(crate) fn axis_name(ndim: usize, axis: usize) -> String {
    let names: &[&str] = match ndim {
        4 => &["batch", "channels", "height", "width"],
        5 => &["batch", "channels", "time", "height", "width"],
        _ => &[],
    };
    names
        .get(axis)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("axis {axis}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_invariants() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn crop_picks_block() {
        let t = Tensor::from_fn(&[1, 1, 4, 4], |i| i as f64);
        let c = t.crop(&[0, 0, 1, 2], &[1, 1, 2, 2]).unwrap();
        assert_eq!(c.data(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(t.crop(&[0, 0, 3, 3], &[1, 1, 2, 2]).is_err());
    }

    #[test]
    fn stack_and_slice_round_trip() {
        let a = Tensor::from_fn(&[1, 2, 2, 2], |i| i as f64);
        let b = a.scale(-1.0);
        let s = Tensor::stack_batch(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.shape(), &[2, 2, 2, 2]);
        assert_eq!(s.batch_slice(1, 1).unwrap(), b);
    }
}
