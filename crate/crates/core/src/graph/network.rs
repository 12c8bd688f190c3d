//! The unfolded MGBPv2 / MGBP-3D generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{MgbpConfig, ModuleKind, ModuleTag};
use crate::backend::{Backend, Eval};
use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, Tensor};
use crate::ParamStore;

/// One parameterized module of the unfolded graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuleDef {
    pub tag: ModuleTag,
    pub spec: ConvSpec,
    pub transposed: bool,
    /// Upscalers apply a relu to their input before the transposed conv.
    pub relu_first: bool,
}

impl ModuleDef {
    pub fn for_tag(cfg: &MgbpConfig, tag: &ModuleTag) -> Self {
        let (spec, transposed, relu_first) = match tag.kind {
            ModuleKind::Analysis => (cfg.analysis_spec(tag.level), false, false),
            ModuleKind::Synthesis => (cfg.synthesis_spec(), false, false),
            ModuleKind::Downscale => (cfg.down_spec(tag.level), false, false),
            ModuleKind::Upscale => (cfg.up_spec(tag.level), true, true),
        };
        ModuleDef {
            tag: tag.clone(),
            spec,
            transposed,
            relu_first,
        }
    }

    pub fn weight_shape(&self, cube: bool) -> Vec<usize> {
        self.spec.weight_shape(cube, self.transposed)
    }

    pub fn parameter_count(&self, cube: bool) -> usize {
        self.weight_shape(cube).iter().product::<usize>() + self.spec.out_channels
    }
}

/// Interpreter used for the dry run: values carry nothing, modules are only
/// recorded in execution order.
#[derive(Default)]
struct DryRun {
    modules: Vec<ModuleDef>,
    leaf_calls: usize,
}

impl Backend for DryRun {
    type Value = ();

    fn input(&mut self, _key: &str, _t: Tensor) -> Result<()> {
        Ok(())
    }
    fn param(&mut self, _key: &str, _t: &Tensor) -> Result<()> {
        Ok(())
    }
    fn placeholder(&mut self, _key: &str, _shape: &[usize]) -> Result<()> {
        Ok(())
    }
    fn conv(&mut self, _: &(), _: &(), _: &(), _: &ConvSpec) -> Result<()> {
        Ok(())
    }
    fn conv_transposed(&mut self, _: &(), _: &(), _: &(), _: &ConvSpec) -> Result<()> {
        Ok(())
    }
    fn relu(&mut self, _: &()) -> Result<()> {
        Ok(())
    }
    fn concat(&mut self, _: &[&()]) -> Result<()> {
        Ok(())
    }
    fn add(&mut self, _: &(), _: &()) -> Result<()> {
        Ok(())
    }
    fn enter_module(&mut self, def: &ModuleDef) {
        self.modules.push(def.clone());
    }
    fn bp_enter(&mut self, level: usize, _input: &()) {
        if level == 1 {
            self.leaf_calls += 1;
        }
    }
}

/// Walks the generator recursion on any backend. With `params = None` the
/// backend must accept placeholder parameters (dry run, shape tracing).
pub(crate) struct Unfolder<'a> {
    pub cfg: &'a MgbpConfig,
    pub params: Option<&'a ParamStore>,
}

impl Unfolder<'_> {
    fn fetch<B: Backend>(&self, b: &mut B, key: &str, shape: &[usize]) -> Result<B::Value> {
        match self.params {
            Some(p) => {
                let t = p
                    .get(key)
                    .ok_or_else(|| Error::Contract(format!("missing parameter `{key}`")))?;
                b.param(key, t)
            }
            None => b.placeholder(key, shape),
        }
    }

    pub fn apply<B: Backend>(&self, b: &mut B, tag: &ModuleTag, x: &B::Value) -> Result<B::Value> {
        let def = ModuleDef::for_tag(self.cfg, tag);
        b.enter_module(&def);
        let w = self.fetch(b, &tag.weight_key(), &def.weight_shape(self.cfg.is_cube()))?;
        let bias = self.fetch(b, &tag.bias_key(), &[def.spec.out_channels])?;
        if def.relu_first {
            let r = b.relu(x)?;
            b.conv_transposed(&r, &w, &bias, &def.spec)
        } else if def.transposed {
            b.conv_transposed(x, &w, &bias, &def.spec)
        } else {
            b.conv(x, &w, &bias, &def.spec)
        }
    }

    /// Full generator: analysis at every level, `BP_L`, synthesis.
    pub fn run<B: Backend>(&self, b: &mut B, image: &B::Value, noise: &B::Value) -> Result<B::Value> {
        let levels = self.cfg.levels;
        let x = b.concat(&[image, noise])?;
        let mut refs = Vec::with_capacity(levels);
        for k in 1..=levels {
            refs.push(self.apply(b, &ModuleTag::analysis(k), &x)?);
        }
        drop(x);
        let top = refs.pop().expect("levels >= 1");
        let mut path = Vec::with_capacity(levels);
        let y = self.bp(b, levels, top, &refs, &mut path)?;
        drop(refs);
        self.apply(b, &ModuleTag::synthesis(levels), &y)
    }

    /// `BP_k(u | y_1 … y_{k−1})`; `path` holds the enclosing step indices.
    pub fn bp<B: Backend>(
        &self,
        b: &mut B,
        k: usize,
        u: B::Value,
        refs: &[B::Value],
        path: &mut Vec<usize>,
    ) -> Result<B::Value> {
        if refs.len() + 1 != k {
            return Err(Error::Contract(format!(
                "BP at level {k} needs {} references, got {}",
                k - 1,
                refs.len()
            )));
        }
        b.bp_enter(k, &u);
        let mut out = u;
        if k > 1 {
            for s in 1..=self.cfg.steps {
                path.push(s);
                let lr = self.apply(b, &ModuleTag::down(k, path), &out)?;
                let c = self.bp(b, k - 1, lr, &refs[..k - 2], path)?;
                let cat = b.concat(&[&refs[k - 2], &c])?;
                drop(c);
                let up = self.apply(b, &ModuleTag::up(k, path), &cat)?;
                drop(cat);
                out = b.add(&out, &up)?;
                path.pop();
            }
        }
        b.bp_exit(k, &out);
        Ok(out)
    }
}

/// Generator topology plus its parameter store.
#[derive(Clone, Debug)]
pub struct NetworkGraph {
    config: MgbpConfig,
    modules: Vec<ModuleDef>,
    leaf_calls: usize,
    params: ParamStore,
}

impl NetworkGraph {
    /// Instantiates every module found by a dry run of the recursion and
    /// initializes weights uniformly in `±1/√fan_in` from `seed`; biases
    /// start at zero.
    pub fn build(config: MgbpConfig, seed: u64) -> Result<Self> {
        let mut g = Self::dry_run(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cube = g.config.is_cube();
        for def in &g.modules {
            let wshape = def.weight_shape(cube);
            let spec = &def.spec;
            let fan_in = if def.transposed {
                let vol = spec.kernel_volume() as f64;
                let stride_vol: usize = spec.stride.iter().product();
                spec.in_channels as f64 * vol / stride_vol as f64
            } else {
                (spec.in_channels * spec.kernel_volume()) as f64
            };
            let bound = 1.0 / fan_in.max(1.0).sqrt();
            let w = Tensor::from_fn(&wshape, |_| rng.random_range(-bound..bound));
            g.params.insert(def.tag.weight_key(), w);
            g.params.insert(def.tag.bias_key(), Tensor::zeros(&[spec.out_channels]));
        }
        Ok(g)
    }

    /// Topology only, with an empty parameter store.
    pub fn dry_run(config: MgbpConfig) -> Result<Self> {
        config.validate()?;
        let mut dry = DryRun::default();
        Unfolder {
            cfg: &config,
            params: None,
        }
        .run(&mut dry, &(), &())?;
        Ok(NetworkGraph {
            config,
            modules: dry.modules,
            leaf_calls: dry.leaf_calls,
            params: ParamStore::new(),
        })
    }

    pub fn config(&self) -> &MgbpConfig {
        &self.config
    }

    /// Modules in dry-run (execution) order.
    pub fn modules(&self) -> &[ModuleDef] {
        &self.modules
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Replaces parameters; every key and shape must match the topology.
    pub fn set_params(&mut self, params: ParamStore) -> Result<()> {
        let cube = self.config.is_cube();
        let expected = self.modules.len() * 2;
        if params.len() != expected {
            return Err(Error::Contract(format!(
                "parameter store has {} entries, graph expects {expected}",
                params.len()
            )));
        }
        for def in &self.modules {
            for (key, shape) in [
                (def.tag.weight_key(), def.weight_shape(cube)),
                (def.tag.bias_key(), vec![def.spec.out_channels]),
            ] {
                let t = params
                    .get(&key)
                    .ok_or_else(|| Error::Contract(format!("missing parameter `{key}`")))?;
                if t.shape() != shape.as_slice() {
                    return Err(Error::Shape(format!(
                        "parameter `{key}` has shape {:?}, expected {shape:?}",
                        t.shape()
                    )));
                }
            }
        }
        self.params = params;
        Ok(())
    }

    pub fn param_mut(&mut self, key: &str) -> Option<&mut Tensor> {
        self.params.get_mut(key)
    }

    /// Mutable access for optimizers; keys and shapes must be left intact.
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        let cube = self.config.is_cube();
        self.modules.iter().map(|m| m.parameter_count(cube)).sum()
    }

    /// Number of `BP_1` (leaf) invocations in the unfolded recursion.
    pub fn leaf_invocations(&self) -> usize {
        self.leaf_calls
    }

    /// Number of distinct scaler modules of `kind` at level `k`.
    pub fn scaler_count(&self, kind: ModuleKind, k: usize) -> usize {
        self.modules.iter().filter(|m| m.tag.kind == kind && m.tag.level == k).count()
    }

    /// `W·N(0, 1)` noise channel at the input resolution. Zero amplitude
    /// yields exact zeros without touching the generator.
    pub fn noise(input_shape: &[usize], seed: u64, amplitude: f64) -> Tensor {
        let mut shape = input_shape.to_vec();
        shape[1] = 1;
        if amplitude == 0.0 {
            return Tensor::zeros(&shape);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&shape, |_| {
            let z: f64 = rng.sample(StandardNormal);
            amplitude * z
        })
    }

    /// Runs the generator on a bicubic-upscaled input.
    pub fn forward(&self, input: &Tensor, noise_seed: u64, amplitude: f64) -> Result<Tensor> {
        let noise = Self::noise(input.shape(), noise_seed, amplitude);
        self.forward_with_noise(input, &noise)
    }

    pub fn forward_with_noise(&self, input: &Tensor, noise: &Tensor) -> Result<Tensor> {
        self.check_input(input, noise)?;
        self.forward_on(&mut Eval, input.clone(), noise.clone())
    }

    pub(crate) fn check_input(&self, input: &Tensor, noise: &Tensor) -> Result<()> {
        self.config.check_input_shape(input.shape())?;
        let mut ns = input.shape().to_vec();
        ns[1] = 1;
        if noise.shape() != ns.as_slice() {
            return Err(Error::Shape(format!(
                "noise shape {:?} does not match input {:?}",
                noise.shape(),
                input.shape()
            )));
        }
        Ok(())
    }

    /// Runs the generator on an arbitrary backend.
    pub fn forward_on<B: Backend>(&self, b: &mut B, input: Tensor, noise: Tensor) -> Result<B::Value> {
        let x = b.input("input", input)?;
        let n = b.input("noise", noise)?;
        self.unfolder().run(b, &x, &n)
    }

    pub(crate) fn unfolder(&self) -> Unfolder<'_> {
        Unfolder {
            cfg: &self.config,
            params: Some(&self.params),
        }
    }

    /// One back-projection block `BP_k(u | refs)` evaluated on its own.
    /// `prefix` is the step path of the enclosing blocks (`levels − k`
    /// entries), which selects the scaler instances used.
    pub fn bp_block(&self, u: &Tensor, refs: &[Tensor], k: usize, prefix: &[usize]) -> Result<Tensor> {
        if k == 0 || k > self.config.levels {
            return Err(Error::Contract(format!("level {k} outside 1..={}", self.config.levels)));
        }
        if prefix.len() != self.config.levels - k {
            return Err(Error::Contract(format!(
                "level {k} needs a step prefix of length {}",
                self.config.levels - k
            )));
        }
        let mut path = prefix.to_vec();
        self.unfolder().bp(&mut Eval, k, u.clone(), refs, &mut path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_law_small() {
        for (steps, levels) in [(2, 5), (1, 3), (3, 2), (2, 1)] {
            let g = NetworkGraph::dry_run(MgbpConfig::toy(levels, steps, 2)).unwrap();
            assert_eq!(g.leaf_invocations(), steps.pow(levels as u32 - 1));
        }
    }

    #[test]
    fn single_level_is_analysis_then_synthesis() {
        let g = NetworkGraph::dry_run(MgbpConfig::toy(1, 2, 4)).unwrap();
        let kinds: Vec<ModuleKind> = g.modules().iter().map(|m| m.tag.kind).collect();
        assert_eq!(kinds, vec![ModuleKind::Analysis, ModuleKind::Synthesis]);
    }

    #[test]
    fn every_scaler_instance_is_distinct() {
        let g = NetworkGraph::dry_run(MgbpConfig::toy(5, 2, 2)).unwrap();
        for k in 2..=5 {
            // μ steps in each of μ^(L−k) invocations of BP_k
            let expected = 2usize.pow((5 - k + 1) as u32);
            assert_eq!(g.scaler_count(ModuleKind::Downscale, k), expected);
            assert_eq!(g.scaler_count(ModuleKind::Upscale, k), expected);
        }
        let mut tags: Vec<String> = g.modules().iter().map(|m| m.tag.to_string()).collect();
        let n = tags.len();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), n);
    }

    #[test]
    fn refs_length_is_checked() {
        let g = NetworkGraph::build(MgbpConfig::toy(2, 1, 2), 0).unwrap();
        let u = Tensor::zeros(&[1, 2, 4, 4]);
        let err = g.bp_block(&u, &[], 2, &[]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert_eq!(g.bp_block(&u, &[], 1, &[1]).unwrap(), u);
    }

    #[test]
    fn zero_amplitude_noise_is_exact_zero() {
        let n = NetworkGraph::noise(&[1, 3, 4, 4], 7, 0.0);
        assert!(n.data().iter().all(|v| v.to_bits() == 0));
        assert_eq!(n.shape(), &[1, 1, 4, 4]);
    }
}
