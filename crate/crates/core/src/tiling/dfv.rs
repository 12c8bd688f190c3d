use crate::backend::Frozen;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::tensor::Tensor;

/// The generator with every relu frozen to its on/off pattern at one input,
/// at zero noise amplitude.
pub struct Linearization<'a> {
    graph: &'a NetworkGraph,
    frozen: Frozen,
    input_shape: Vec<usize>,
}

impl<'a> Linearization<'a> {
    pub fn at(graph: &'a NetworkGraph, input: &Tensor) -> Result<Self> {
        let noise = NetworkGraph::noise(input.shape(), 0, 0.0);
        graph.check_input(input, &noise)?;
        let mut frozen = Frozen::recording();
        graph.forward_on(&mut frozen, input.clone(), noise)?;
        Ok(Linearization {
            graph,
            frozen: frozen.replay(true),
            input_shape: input.shape().to_vec(),
        })
    }

    fn run(&mut self, x: &Tensor, drop_bias: bool) -> Result<Tensor> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "probe shape {:?} differs from the linearization point {:?}",
                x.shape(),
                self.input_shape
            )));
        }
        self.frozen.rewind();
        self.frozen.set_drop_bias(drop_bias);
        let noise = NetworkGraph::noise(x.shape(), 0, 0.0);
        let out = self.graph.forward_on(&mut self.frozen, x.clone(), noise);
        self.frozen.set_drop_bias(true);
        out
    }

    /// Linear part: frozen masks, no biases.
    pub fn linear(&mut self, probe: &Tensor) -> Result<Tensor> {
        self.run(probe, true)
    }

    /// Frozen network with biases kept (affine in its input).
    pub fn affine(&mut self, x: &Tensor) -> Result<Tensor> {
        self.run(x, false)
    }
}

pub(crate) fn impulse(shape: &[usize], pixel: &[usize], amplitude: f64) -> Result<Tensor> {
    if pixel.len() != shape.len() || pixel.iter().zip(shape).any(|(&p, &s)| p >= s) {
        return Err(Error::Bounds(format!("pixel {pixel:?} outside input {shape:?}")));
    }
    let mut t = Tensor::zeros(shape);
    let mut flat = 0;
    for (&p, &s) in pixel.iter().zip(shape) {
        flat = flat * s + p;
    }
    t.data_mut()[flat] = amplitude;
    Ok(t)
}

/// Impulse response of the frozen network at `pixel` (a full index into the
/// input, `[n, c, (t,) y, x]`), scaled by `1/δ`.
pub fn dfv_impulse_response(graph: &NetworkGraph, input: &Tensor, pixel: &[usize], delta: f64) -> Result<Tensor> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Config(format!("impulse amplitude must be finite and nonzero, got {delta}")));
    }
    let e = impulse(input.shape(), pixel, delta)?;
    let mut lin = Linearization::at(graph, input)?;
    Ok(lin.linear(&e)?.scale(1.0 / delta))
}

/// `(f_frozen(x + δe) − f_frozen(x))/δ` with biases kept.
pub fn dfv_difference_quotient(
    graph: &NetworkGraph,
    input: &Tensor,
    pixel: &[usize],
    delta: f64,
) -> Result<Tensor> {
    let e = impulse(input.shape(), pixel, delta)?;
    let mut lin = Linearization::at(graph, input)?;
    let hi = lin.affine(&input.add(&e)?)?;
    let lo = lin.affine(input)?;
    Ok(hi.sub(&lo)?.scale(1.0 / delta))
}
