//! Shape-only execution of the unfolded generator.

use std::cell::Cell;
use std::rc::Rc;

use super::{MgbpConfig, ModuleDef, ModuleKind, ModuleTag, Unfolder};
use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, Tensor};

const BYTES_PER_ELEMENT: usize = std::mem::size_of::<f64>();

/// One executed module.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuleShape {
    pub tag: ModuleTag,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
    /// Multiply-accumulates of the convolution (bias additions excluded).
    pub macs: u64,
    pub parameters: usize,
}

/// Entry and exit shapes of one back-projection block invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockShape {
    pub level: usize,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeTrace {
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    /// Modules in execution order; a module runs once per appearance.
    pub modules: Vec<ModuleShape>,
    /// Blocks in completion order (innermost first).
    pub blocks: Vec<BlockShape>,
    /// Temporal extent of the features at level `k` (index `k − 1`); 1 for
    /// images.
    pub level_frames: Vec<usize>,
    /// Largest number of activation bytes alive at once, inputs included.
    pub peak_activation_bytes: usize,
    pub parameter_bytes: usize,
    /// Elementwise relu/add work, counted in elements.
    pub elementwise_ops: u64,
}

impl ShapeTrace {
    pub fn total_macs(&self) -> u64 {
        self.modules.iter().map(|m| m.macs).sum()
    }

    pub fn frames_at_level(&self, k: usize) -> usize {
        self.level_frames[k - 1]
    }

    /// Relative reduction of the temporal extent at the lowest level.
    pub fn volume_saving(&self) -> f64 {
        let t = self.input_shape.get(2).copied().filter(|_| self.input_shape.len() == 5).unwrap_or(1);
        (t - self.level_frames[0]) as f64 / t as f64
    }

    /// Peak activations plus parameters.
    pub fn memory_footprint_bytes(&self) -> usize {
        self.peak_activation_bytes + self.parameter_bytes
    }

    pub fn macs_of(&self, kind: ModuleKind, level: usize) -> u64 {
        self.modules
            .iter()
            .filter(|m| m.tag.kind == kind && m.tag.level == level)
            .map(|m| m.macs)
            .sum()
    }

    /// Every block leaves with the shape it entered with.
    pub fn is_cube_to_cube(&self) -> bool {
        self.blocks.iter().all(|b| b.input == b.output)
    }
}

struct Live {
    bytes: usize,
    counter: Rc<Cell<usize>>,
}

impl Drop for Live {
    fn drop(&mut self) {
        self.counter.set(self.counter.get() - self.bytes);
    }
}

#[derive(Clone)]
struct ShapeVal {
    shape: Vec<usize>,
    _live: Option<Rc<Live>>,
}

struct Tracer {
    live: Rc<Cell<usize>>,
    peak: usize,
    pending: Option<ModuleDef>,
    modules: Vec<ModuleShape>,
    blocks: Vec<BlockShape>,
    open_blocks: Vec<Vec<usize>>,
    level_frames: Vec<usize>,
    parameter_bytes: usize,
    elementwise: u64,
    cube: bool,
}

impl Tracer {
    fn activation(&mut self, shape: Vec<usize>) -> ShapeVal {
        let bytes = shape.iter().product::<usize>() * BYTES_PER_ELEMENT;
        self.live.set(self.live.get() + bytes);
        self.peak = self.peak.max(self.live.get());
        ShapeVal {
            shape,
            _live: Some(Rc::new(Live {
                bytes,
                counter: self.live.clone(),
            })),
        }
    }

    fn spatial(&self, shape: &[usize]) -> [usize; 3] {
        if shape.len() == 5 {
            [shape[2], shape[3], shape[4]]
        } else {
            [1, shape[2], shape[3]]
        }
    }

    fn with_spatial(&self, shape: &[usize], channels: usize, ext: [usize; 3]) -> Vec<usize> {
        if shape.len() == 5 {
            vec![shape[0], channels, ext[0], ext[1], ext[2]]
        } else {
            vec![shape[0], channels, ext[1], ext[2]]
        }
    }

    fn row_error(&self, e: Error) -> Error {
        let tag = self
            .pending
            .as_ref()
            .map(|d| d.tag.to_string())
            .unwrap_or_else(|| "?".into());
        Error::Shape(format!("trace row {} ({tag}): {e}", self.modules.len()))
    }

    fn record(&mut self, x: &ShapeVal, out: Vec<usize>, spec: &ConvSpec, transposed: bool) -> Result<ShapeVal> {
        if x.shape[1] != spec.in_channels {
            return Err(self.row_error(Error::dim("channels", spec.in_channels, x.shape[1])));
        }
        let def = self
            .pending
            .take()
            .ok_or_else(|| Error::Contract("convolution outside a module".into()))?;
        let kvol = spec.kernel_volume() as u64;
        let macs = if transposed {
            x.shape.iter().product::<usize>() as u64 * spec.out_channels as u64 * kvol
        } else {
            out.iter().product::<usize>() as u64 * spec.in_channels as u64 * kvol
        };
        let parameters = def.parameter_count(self.cube);
        self.parameter_bytes += parameters * BYTES_PER_ELEMENT;
        if def.tag.kind == ModuleKind::Analysis {
            self.level_frames[def.tag.level - 1] = if out.len() == 5 { out[2] } else { 1 };
        }
        self.modules.push(ModuleShape {
            tag: def.tag,
            input: x.shape.clone(),
            output: out.clone(),
            macs,
            parameters,
        });
        Ok(self.activation(out))
    }
}

impl Backend for Tracer {
    type Value = ShapeVal;

    fn input(&mut self, _key: &str, t: Tensor) -> Result<ShapeVal> {
        Ok(self.activation(t.shape().to_vec()))
    }

    fn param(&mut self, _key: &str, t: &Tensor) -> Result<ShapeVal> {
        Ok(ShapeVal {
            shape: t.shape().to_vec(),
            _live: None,
        })
    }

    fn placeholder(&mut self, _key: &str, shape: &[usize]) -> Result<ShapeVal> {
        Ok(ShapeVal {
            shape: shape.to_vec(),
            _live: None,
        })
    }

    fn conv(&mut self, x: &ShapeVal, _w: &ShapeVal, _b: &ShapeVal, spec: &ConvSpec) -> Result<ShapeVal> {
        let ext = spec.output_extent(self.spatial(&x.shape)).map_err(|e| self.row_error(e))?;
        let out = self.with_spatial(&x.shape, spec.out_channels, ext);
        self.record(x, out, spec, false)
    }

    fn conv_transposed(&mut self, x: &ShapeVal, _w: &ShapeVal, _b: &ShapeVal, spec: &ConvSpec) -> Result<ShapeVal> {
        let ext = spec
            .transposed_output_extent(self.spatial(&x.shape))
            .map_err(|e| self.row_error(e))?;
        let out = self.with_spatial(&x.shape, spec.out_channels, ext);
        self.record(x, out, spec, true)
    }

    fn relu(&mut self, x: &ShapeVal) -> Result<ShapeVal> {
        self.elementwise += x.shape.iter().product::<usize>() as u64;
        Ok(self.activation(x.shape.clone()))
    }

    fn concat(&mut self, parts: &[&ShapeVal]) -> Result<ShapeVal> {
        let first = &parts[0].shape;
        let mut channels = 0;
        for p in parts {
            if p.shape.len() != first.len() || p.shape[0] != first[0] || p.shape[2..] != first[2..] {
                return Err(self.row_error(Error::Shape(format!(
                    "concat of {:?} with {:?}",
                    first, p.shape
                ))));
            }
            channels += p.shape[1];
        }
        let mut shape = first.clone();
        shape[1] = channels;
        Ok(self.activation(shape))
    }

    fn add(&mut self, a: &ShapeVal, b: &ShapeVal) -> Result<ShapeVal> {
        if a.shape != b.shape {
            return Err(self.row_error(Error::Shape(format!(
                "residual add of {:?} and {:?}",
                a.shape, b.shape
            ))));
        }
        self.elementwise += a.shape.iter().product::<usize>() as u64;
        Ok(self.activation(a.shape.clone()))
    }

    fn enter_module(&mut self, def: &ModuleDef) {
        self.pending = Some(def.clone());
    }

    fn bp_enter(&mut self, _level: usize, input: &ShapeVal) {
        self.open_blocks.push(input.shape.clone());
    }

    fn bp_exit(&mut self, level: usize, output: &ShapeVal) {
        let input = self.open_blocks.pop().expect("balanced block hooks");
        self.blocks.push(BlockShape {
            level,
            input,
            output: output.shape.clone(),
        });
    }
}

/// Runs the generator recursion on shapes only.
pub fn trace_shapes(config: &MgbpConfig, input_shape: &[usize]) -> Result<ShapeTrace> {
    config.validate()?;
    let rank = if config.is_cube() { 5 } else { 4 };
    if input_shape.len() != rank {
        return Err(Error::Shape(format!(
            "expected a rank-{rank} input shape, got {input_shape:?}"
        )));
    }
    if input_shape[1] != config.image_channels {
        return Err(Error::dim("channels", config.image_channels, input_shape[1]));
    }
    let mut noise_shape = input_shape.to_vec();
    noise_shape[1] = 1;
    let mut tracer = Tracer {
        live: Rc::new(Cell::new(0)),
        peak: 0,
        pending: None,
        modules: Vec::new(),
        blocks: Vec::new(),
        open_blocks: Vec::new(),
        level_frames: vec![1; config.levels],
        parameter_bytes: 0,
        elementwise: 0,
        cube: config.is_cube(),
    };
    let output_shape = {
        let x = tracer.activation(input_shape.to_vec());
        let n = tracer.activation(noise_shape);
        let out = Unfolder { cfg: config, params: None }.run(&mut tracer, &x, &n)?;
        out.shape.clone()
    };
    Ok(ShapeTrace {
        input_shape: input_shape.to_vec(),
        output_shape,
        modules: tracer.modules,
        blocks: tracer.blocks,
        level_frames: tracer.level_frames,
        peak_activation_bytes: tracer.peak,
        parameter_bytes: tracer.parameter_bytes,
        elementwise_ops: tracer.elementwise,
    })
}
