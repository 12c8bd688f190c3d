//! Reverse-mode differentiation over the tensor primitives.
//!
//! A [`Tape`] records every op applied during a forward pass together with
//! the values the backward rules need. Leaves created with a key (parameters,
//! or inputs whose gradient is wanted) show up in the [`GradientMap`].

mod check;

pub use check::{finite_diff_check, FdCheck, FdReport};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::tensor::{self, AxisMap, ConvSpec, Direction, Tensor};
use crate::ParamStore;

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv { x: Var, w: Var, b: Var, spec: ConvSpec },
    ConvT { x: Var, w: Var, b: Var, spec: ConvSpec },
    Relu(Var),
    Concat(Vec<Var>),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sqrt(Var),
    Abs(Var),
    Softplus(Var),
    Sum(Var),
    Mean(Var),
    SpatialMean(Var),
    Axis { x: Var, axis: usize, map: Arc<AxisMap> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients keyed by leaf name. Every keyed leaf on the tape has an entry;
/// leaves the output does not depend on map to zeros.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientMap {
    grads: BTreeMap<String, Tensor>,
}

impl GradientMap {
    pub fn get(&self, key: &str) -> Option<&Tensor> {
        self.grads.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.grads.iter()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn into_inner(self) -> BTreeMap<String, Tensor> {
        self.grads
    }

    /// Adds zero gradients for store entries the tape never touched.
    pub fn fill_missing(&mut self, params: &ParamStore) {
        for (k, v) in params {
            self.grads
                .entry(k.clone())
                .or_insert_with(|| Tensor::zeros(v.shape()));
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    keyed: BTreeMap<String, Var>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears the record so the tape can be reused for a new forward pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.keyed.clear();
        self.consumed = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Conv { x, w, b, .. } | Op::ConvT { x, w, b, .. } => {
                self.needs(*x) || self.needs(*w) || self.needs(*b)
            }
            Op::Concat(parts) => parts.iter().any(|&p| self.needs(p)),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => self.needs(*a) || self.needs(*b),
            Op::Relu(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Sqrt(a)
            | Op::Abs(a)
            | Op::Softplus(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SpatialMean(a)
            | Op::Axis { x: a, .. } => self.needs(*a),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable leaf. Re-registering a key returns the existing leaf.
    pub fn leaf(&mut self, key: &str, t: Tensor) -> Var {
        if let Some(&v) = self.keyed.get(key) {
            return v;
        }
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.keyed.insert(key.to_string(), v);
        v
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn keyed_leaf(&self, key: &str) -> Option<Var> {
        self.keyed.get(key).copied()
    }

    pub fn conv(&mut self, x: Var, w: Var, b: Var, spec: &ConvSpec) -> Result<Var> {
        let y = tensor::conv(self.value(x), self.value(w), self.value(b), spec)?;
        Ok(self.push(y, Op::Conv { x, w, b, spec: *spec }))
    }

    pub fn conv_transposed(&mut self, x: Var, w: Var, b: Var, spec: &ConvSpec) -> Result<Var> {
        let y = tensor::conv_transposed(self.value(x), self.value(w), self.value(b), spec)?;
        Ok(self.push(y, Op::ConvT { x, w, b, spec: *spec }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = tensor::relu(self.value(x));
        self.push(y, Op::Relu(x))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let ts: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = tensor::concat_many(&ts)?;
        Ok(self.push(y, Op::Concat(parts.to_vec())))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).sub(self.value(b))?;
        Ok(self.push(y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).mul(self.value(b))?;
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), |p, q| p / q)?;
        Ok(self.push(y, Op::Div(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let y = self.value(a).scale(s);
        self.push(y, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let y = self.value(a).map(|v| v + s);
        self.push(y, Op::AddScalar(a))
    }

    /// Square root; the derivative at exactly zero is taken as zero.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let y = self.value(a).map(f64::sqrt);
        self.push(y, Op::Sqrt(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let y = self.value(a).map(f64::abs);
        self.push(y, Op::Abs(a))
    }

    /// `ln(1 + eˣ)` in a form that neither overflows nor loses the tail.
    pub fn softplus(&mut self, a: Var) -> Var {
        let y = self.value(a).map(softplus);
        self.push(y, Op::Softplus(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let y = Tensor::scalar(self.value(a).sum());
        self.push(y, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let y = Tensor::scalar(self.value(a).mean());
        self.push(y, Op::Mean(a))
    }

    /// Mean over every axis after the channel axis; keeps rank with size-1
    /// spatial axes.
    pub fn spatial_mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let shape = x.shape();
        if shape.len() < 3 {
            return Err(Error::Shape(format!("spatial mean needs rank >= 3, got {shape:?}")));
        }
        let inner: usize = shape[2..].iter().product();
        let data: Vec<f64> = x
            .data()
            .chunks(inner)
            .map(|c| c.iter().sum::<f64>() / inner as f64)
            .collect();
        let mut out_shape = shape.to_vec();
        out_shape[2..].iter_mut().for_each(|d| *d = 1);
        let y = Tensor::new(out_shape, data)?;
        Ok(self.push(y, Op::SpatialMean(a)))
    }

    pub fn axis_map(&mut self, x: Var, axis: usize, map: Arc<AxisMap>) -> Result<Var> {
        let y = map.apply(self.value(x), axis)?;
        Ok(self.push(y, Op::Axis { x, axis, map }))
    }

    pub fn bicubic(&mut self, x: Var, factor: usize, dir: Direction) -> Result<Var> {
        let [(ha, hm), (wa, wm)] = tensor::bicubic_maps(self.value(x), factor, dir)?;
        let t = self.axis_map(x, ha, hm)?;
        self.axis_map(t, wa, wm)
    }

    pub fn gaussian_blur(&mut self, x: Var, kernel_size: usize, sigma: f64) -> Result<Var> {
        let [(ha, hm), (wa, wm)] = tensor::gaussian_maps(self.value(x), kernel_size, sigma)?;
        let t = self.axis_map(x, ha, hm)?;
        self.axis_map(t, wa, wm)
    }

    pub fn shift(&mut self, x: Var, dy: isize, dx: isize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        let nd = shape.len();
        if nd < 2 {
            return Err(Error::Shape(format!("shift needs two spatial axes, got {shape:?}")));
        }
        let mut v = x;
        if dy != 0 {
            v = self.axis_map(v, nd - 2, Arc::new(AxisMap::shift(shape[nd - 2], dy)))?;
        }
        if dx != 0 {
            v = self.axis_map(v, nd - 1, Arc::new(AxisMap::shift(shape[nd - 1], dx)))?;
        }
        Ok(v)
    }

    /// Mean absolute difference.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let d = self.abs(d);
        Ok(self.mean(d))
    }

    /// Runs the backward pass from `output`. A scalar output may omit the
    /// cotangent (taken as 1). Consumes the record: a second call fails until
    /// [`Tape::reset`].
    pub fn backward(&mut self, output: Var, cotangent: Option<Tensor>) -> Result<GradientMap> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let seed = match cotangent {
            Some(c) => {
                self.value(output).check_same_shape(&c)?;
                c
            }
            None => {
                let v = self.value(output);
                if v.len() != 1 {
                    return Err(Error::Contract(format!(
                        "backward without a cotangent needs a scalar output, got shape {:?}",
                        v.shape()
                    )));
                }
                Tensor::full(v.shape(), 1.0)
            }
        };
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            for (target, contrib) in self.local_grads(i, &g)? {
                if !self.needs(target) {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&contrib)?,
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        let mut out = GradientMap::default();
        for (key, &v) in &self.keyed {
            let g = grads
                .get_mut(v.0)
                .and_then(Option::take)
                .unwrap_or_else(|| Tensor::zeros(self.value(v).shape()));
            out.grads.insert(key.clone(), g);
        }
        Ok(out)
    }

    fn local_grads(&self, i: usize, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv { x, w, b, spec } => {
                let r = tensor::conv_backward(val(*x), val(*w), spec, g)?;
                vec![(*x, r.input), (*w, r.weights), (*b, r.bias)]
            }
            Op::ConvT { x, w, b, spec } => {
                let r = tensor::conv_transposed_backward(val(*x), val(*w), spec, g)?;
                vec![(*x, r.input), (*w, r.weights), (*b, r.bias)]
            }
            Op::Relu(x) => vec![(*x, val(*x).zip_map(g, |v, d| if v > 0.0 { d } else { 0.0 })?)],
            Op::Concat(parts) => {
                let sizes: Vec<usize> = parts.iter().map(|&p| val(p).shape()[1]).collect();
                parts
                    .iter()
                    .copied()
                    .zip(tensor::split_channels(g, &sizes)?)
                    .collect()
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
            Op::Mul(a, b) => vec![(*a, g.mul(val(*b))?), (*b, g.mul(val(*a))?)],
            Op::Div(a, b) => {
                let (p, q) = (val(*a), val(*b));
                let da = g.zip_map(q, |d, q| d / q)?;
                let t = p.zip_map(q, |p, q| -p / (q * q))?;
                vec![(*a, da), (*b, g.mul(&t)?)]
            }
            Op::Scale(a, s) => vec![(*a, g.scale(*s))],
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::Sqrt(a) => {
                let d = node.value.zip_map(g, |y, d| if y > 0.0 { d * 0.5 / y } else { 0.0 })?;
                vec![(*a, d)]
            }
            Op::Abs(a) => vec![(*a, val(*a).zip_map(g, |v, d| d * sign(v))?)],
            Op::Softplus(a) => vec![(*a, val(*a).zip_map(g, |v, d| d * sigmoid(v))?)],
            Op::Sum(a) => vec![(*a, Tensor::full(val(*a).shape(), g.data()[0]))],
            Op::Mean(a) => {
                let x = val(*a);
                vec![(*a, Tensor::full(x.shape(), g.data()[0] / x.len() as f64))]
            }
            Op::SpatialMean(a) => {
                let x = val(*a);
                let inner: usize = x.shape()[2..].iter().product();
                let data = g
                    .data()
                    .iter()
                    .flat_map(|&d| std::iter::repeat_n(d / inner as f64, inner))
                    .collect();
                vec![(*a, Tensor::new(x.shape().to_vec(), data)?)]
            }
            Op::Axis { x, axis, map } => vec![(*x, map.apply_adjoint(g, *axis)?)],
        })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Backend for Tape {
    type Value = Var;

    fn input(&mut self, key: &str, t: Tensor) -> Result<Var> {
        // Inputs are differentiable only when the caller registered them
        // beforehand under the same key.
        Ok(match self.keyed_leaf(key) {
            Some(v) => v,
            None => self.constant(t),
        })
    }

    fn param(&mut self, key: &str, t: &Tensor) -> Result<Var> {
        Ok(self.leaf(key, t.clone()))
    }

    fn conv(&mut self, x: &Var, w: &Var, b: &Var, spec: &ConvSpec) -> Result<Var> {
        Tape::conv(self, *x, *w, *b, spec)
    }

    fn conv_transposed(&mut self, x: &Var, w: &Var, b: &Var, spec: &ConvSpec) -> Result<Var> {
        Tape::conv_transposed(self, *x, *w, *b, spec)
    }

    fn relu(&mut self, x: &Var) -> Result<Var> {
        Ok(Tape::relu(self, *x))
    }

    fn concat(&mut self, parts: &[&Var]) -> Result<Var> {
        let parts: Vec<Var> = parts.iter().map(|&&v| v).collect();
        Tape::concat(self, &parts)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::add(self, *a, *b)
    }
}

/// Runs `f` on a fresh tape whose keyed leaves come from `params`.
///
/// Returns the output value (bitwise equal to untaped evaluation of the same
/// ops), the tape, and the output handle for [`Tape::backward`].
pub fn record_forward<F>(f: F, params: &ParamStore) -> Result<(Tensor, Tape, Var)>
where
    F: FnOnce(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    for (k, v) in params {
        tape.leaf(k, v.clone());
    }
    let out = f(&mut tape, params)?;
    Ok((tape.value(out).clone(), tape, out))
}

/// Signs of every relu/abs input on the tape, used to detect kink crossings.
pub(crate) fn kink_signature(tape: &Tape) -> Vec<bool> {
    let mut sig = Vec::new();
    for node in &tape.nodes {
        if let Op::Relu(x) | Op::Abs(x) = node.op {
            sig.extend(tape.value(x).data().iter().map(|&v| v > 0.0));
        }
    }
    sig
}
