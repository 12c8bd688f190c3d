use super::Tensor;
use crate::error::{Error, Result};

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Concatenates along the channel axis; `a`'s channels come first.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    concat_many(&[a, b])
}

pub(crate) fn concat_many(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Contract("concat needs at least one input".into()))?;
    let shape = first.shape();
    if shape.len() < 2 {
        return Err(Error::Shape(format!("concat needs a channel axis, got {shape:?}")));
    }
    let inner: usize = shape[2..].iter().product();
    let mut channels = 0;
    for p in parts {
        let s = p.shape();
        if s.len() != shape.len() {
            return Err(Error::dim("ndim", shape.len(), s.len()));
        }
        for axis in (0..s.len()).filter(|&a| a != 1) {
            if s[axis] != shape[axis] {
                return Err(Error::dim(super::axis_name(s.len(), axis), shape[axis], s[axis]));
            }
        }
        channels += s[1];
    }
    let n = shape[0];
    let mut data = Vec::with_capacity(n * channels * inner);
    for b in 0..n {
        for p in parts {
            let per = p.shape()[1] * inner;
            data.extend_from_slice(&p.data()[b * per..(b + 1) * per]);
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[1] = channels;
    Tensor::new(out_shape, data)
}

/// Inverse of [`concat_many`]: splits channels into blocks of the given sizes.
pub(crate) fn split_channels(x: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let shape = x.shape();
    let total: usize = sizes.iter().sum();
    if total != shape[1] {
        return Err(Error::dim("channels", shape[1], total));
    }
    let inner: usize = shape[2..].iter().product();
    let n = shape[0];
    let mut out: Vec<Vec<f64>> = sizes.iter().map(|&c| Vec::with_capacity(n * c * inner)).collect();
    let mut offset = 0;
    for b in 0..n {
        let item = &x.data()[b * total * inner..(b + 1) * total * inner];
        offset = 0;
        for (i, &c) in sizes.iter().enumerate() {
            out[i].extend_from_slice(&item[offset * inner..(offset + c) * inner]);
            offset += c;
        }
    }
    debug_assert_eq!(offset, total);
    sizes
        .iter()
        .zip(out)
        .map(|(&c, data)| {
            let mut s = shape.to_vec();
            s[1] = c;
            Tensor::new(s, data)
        })
        .collect()
}
