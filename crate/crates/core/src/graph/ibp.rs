//! Classic iterative back-projection, the linear ancestor of the learned
//! blocks.

use crate::error::{Error, Result};
use crate::tensor::{conv, conv_transposed, ConvSpec, Tensor};

/// A bias-free linear operator given as a convolution.
#[derive(Clone, Debug)]
pub struct LinearConv {
    pub spec: ConvSpec,
    pub weights: Tensor,
    /// Apply as a transposed convolution.
    pub transposed: bool,
}

impl LinearConv {
    pub fn conv(spec: ConvSpec, weights: Tensor) -> Self {
        LinearConv {
            spec,
            weights,
            transposed: false,
        }
    }

    pub fn conv_transposed(spec: ConvSpec, weights: Tensor) -> Self {
        LinearConv {
            spec,
            weights,
            transposed: true,
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let bias = Tensor::zeros(&[self.spec.out_channels]);
        if self.transposed {
            conv_transposed(x, &self.weights, &bias, &self.spec)
        } else {
            conv(x, &self.weights, &bias, &self.spec)
        }
    }
}

/// Runs `y_{k+1} = y_k + P(x − R(y_k))` for `iters` iterations.
///
/// Returns the final estimate and `‖x − R(y_k)‖₂` for `k = 0..=iters`.
pub fn ibp_classic(
    x: &Tensor,
    restrict: &LinearConv,
    project: &LinearConv,
    y0: &Tensor,
    iters: usize,
) -> Result<(Tensor, Vec<f64>)> {
    let mut y = y0.clone();
    let mut norms = Vec::with_capacity(iters + 1);
    for it in 0..=iters {
        let ry = restrict.apply(&y)?;
        if ry.shape() != x.shape() {
            return Err(Error::Shape(format!(
                "R(y) has shape {:?} but x has shape {:?}",
                ry.shape(),
                x.shape()
            )));
        }
        let e = x.sub(&ry)?;
        norms.push(e.norm());
        if it == iters {
            break;
        }
        let correction = project.apply(&e)?;
        if correction.shape() != y.shape() {
            return Err(Error::Shape(format!(
                "P(e) has shape {:?} but y has shape {:?}",
                correction.shape(),
                y.shape()
            )));
        }
        y.add_assign(&correction)?;
    }
    Ok((y, norms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn average_pair() -> (LinearConv, LinearConv) {
        let spec = ConvSpec::square(1, 1, 2, 2, 0);
        let r = LinearConv::conv(spec, Tensor::full(&[1, 1, 2, 2], 0.25));
        let p = LinearConv::conv_transposed(spec, Tensor::full(&[1, 1, 2, 2], 1.0));
        (r, p)
    }

    #[test]
    fn constant_residual_vanishes_in_one_step() {
        let (r, p) = average_pair();
        let x = Tensor::full(&[1, 1, 4, 4], 3.0);
        let (y, norms) = ibp_classic(&x, &r, &p, &Tensor::zeros(&[1, 1, 8, 8]), 1).unwrap();
        assert!(norms[0] > 0.0);
        assert!(norms[1] < 1e-14);
        assert!(y.data().iter().all(|&v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn consistent_start_is_a_fixed_point() {
        let (r, p) = average_pair();
        let y0 = Tensor::from_fn(&[1, 1, 8, 8], |i| (i as f64 * 0.37).sin());
        let x = r.apply(&y0).unwrap();
        let (y, norms) = ibp_classic(&x, &r, &p, &y0, 5).unwrap();
        assert!(norms.iter().all(|&n| n == 0.0));
        assert_eq!(y, y0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (r, p) = average_pair();
        let x = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(matches!(
            ibp_classic(&x, &r, &p, &Tensor::zeros(&[1, 1, 8, 8]), 1),
            Err(Error::Shape(_))
        ));
    }
}
