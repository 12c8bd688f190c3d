//! The op vocabulary generator graphs are written against.
//!
//! One forward definition runs on several interpreters: plain evaluation,
//! the differentiation tape, frozen-activation replay, and the shape/cost
//! tracer. Keeping the unfolding in one place is what makes the tracer's
//! counts and the tape's gradients describe the same network.

use crate::error::{Error, Result};
use crate::graph::ModuleDef;
use crate::tensor::{self, ConvSpec, Tensor};

pub trait Backend {
    type Value: Clone;

    /// A non-trainable input (images, noise).
    fn input(&mut self, key: &str, t: Tensor) -> Result<Self::Value>;
    /// A trainable parameter, looked up by key.
    fn param(&mut self, key: &str, t: &Tensor) -> Result<Self::Value>;
    /// A parameter known only by shape; only tracing backends accept these.
    fn placeholder(&mut self, key: &str, _shape: &[usize]) -> Result<Self::Value> {
        Err(Error::Unsupported(format!("backend needs a value for parameter `{key}`")))
    }
    fn conv(&mut self, x: &Self::Value, w: &Self::Value, b: &Self::Value, spec: &ConvSpec) -> Result<Self::Value>;
    fn conv_transposed(
        &mut self,
        x: &Self::Value,
        w: &Self::Value,
        b: &Self::Value,
        spec: &ConvSpec,
    ) -> Result<Self::Value>;
    fn relu(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn concat(&mut self, parts: &[&Self::Value]) -> Result<Self::Value>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    /// Called before a module's parameters are fetched.
    fn enter_module(&mut self, _def: &ModuleDef) {}
    /// Called when a back-projection block at `level` starts.
    fn bp_enter(&mut self, _level: usize, _input: &Self::Value) {}
    /// Called when a back-projection block at `level` finishes.
    fn bp_exit(&mut self, _level: usize, _output: &Self::Value) {}
}

/// Direct evaluation on tensors.
#[derive(Debug, Default)]
pub struct Eval;

impl Backend for Eval {
    type Value = Tensor;

    fn input(&mut self, _key: &str, t: Tensor) -> Result<Tensor> {
        Ok(t)
    }

    fn param(&mut self, _key: &str, t: &Tensor) -> Result<Tensor> {
        Ok(t.clone())
    }

    fn conv(&mut self, x: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
        tensor::conv(x, w, b, spec)
    }

    fn conv_transposed(&mut self, x: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
        tensor::conv_transposed(x, w, b, spec)
    }

    fn relu(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(tensor::relu(x))
    }

    fn concat(&mut self, parts: &[&Tensor]) -> Result<Tensor> {
        tensor::concat_many(parts)
    }

    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.add(b)
    }
}

/// Evaluation with every relu replaced by a recorded mask.
///
/// In recording mode relus behave normally and their on/off patterns are
/// stored in execution order. In replay mode the stored patterns gate the
/// inputs instead, so the network becomes affine in its input; with
/// `drop_bias` set the biases are skipped as well and the network is linear.
#[derive(Debug, Default)]
pub struct Frozen {
    masks: Vec<Vec<bool>>,
    cursor: Option<usize>,
    drop_bias: bool,
}

impl Frozen {
    pub fn recording() -> Self {
        Self::default()
    }

    /// Switches to replay of the recorded masks.
    pub fn replay(mut self, drop_bias: bool) -> Self {
        self.cursor = Some(0);
        self.drop_bias = drop_bias;
        self
    }

    pub fn set_drop_bias(&mut self, on: bool) {
        self.drop_bias = on;
    }

    /// Restarts replay from the first mask.
    pub fn rewind(&mut self) {
        if self.cursor.is_some() {
            self.cursor = Some(0);
        }
    }

    pub fn mask_count(&self) -> usize {
        self.masks.len()
    }

    fn bias<'a>(&self, b: &'a Tensor, zero: &'a mut Option<Tensor>) -> &'a Tensor {
        if self.drop_bias {
            zero.insert(Tensor::zeros(b.shape()))
        } else {
            b
        }
    }
}

impl Backend for Frozen {
    type Value = Tensor;

    fn input(&mut self, _key: &str, t: Tensor) -> Result<Tensor> {
        Ok(t)
    }

    fn param(&mut self, _key: &str, t: &Tensor) -> Result<Tensor> {
        Ok(t.clone())
    }

    fn conv(&mut self, x: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
        let mut z = None;
        let b = self.bias(b, &mut z);
        tensor::conv(x, w, b, spec)
    }

    fn conv_transposed(&mut self, x: &Tensor, w: &Tensor, b: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
        let mut z = None;
        let b = self.bias(b, &mut z);
        tensor::conv_transposed(x, w, b, spec)
    }

    fn relu(&mut self, x: &Tensor) -> Result<Tensor> {
        match self.cursor {
            None => {
                self.masks.push(x.data().iter().map(|&v| v > 0.0).collect());
                Ok(tensor::relu(x))
            }
            Some(i) => {
                let mask = self.masks.get(i).ok_or_else(|| {
                    Error::Contract(format!("frozen replay asked for relu #{i} of {}", self.masks.len()))
                })?;
                if mask.len() != x.len() {
                    return Err(Error::dim("frozen relu mask", mask.len(), x.len()));
                }
                self.cursor = Some(i + 1);
                let data = x.data().iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
                Tensor::new(x.shape().to_vec(), data)
            }
        }
    }

    fn concat(&mut self, parts: &[&Tensor]) -> Result<Tensor> {
        tensor::concat_many(parts)
    }

    fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.add(b)
    }
}
