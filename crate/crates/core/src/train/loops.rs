use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{adam_step, impair, sample_patches, AdamState, Checkpoint, Dataset, StepLog, TrainConfig, TrainMode};
use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::metrics;
use crate::perceptual::{
    high_fidelity_loss_var, rsgan_losses_var, total_perceptual_loss, ContextualLoss, Discriminator, LossWeights,
};
use crate::tensor::Tensor;
use crate::tiling::vn_statistics;
use crate::ParamStore;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whole-image `(input, target)` pairs, each image cropped to the largest
/// size divisible by both the factor and the network's coarsest stride.
pub fn validation_pairs(data: &Dataset, graph: &NetworkGraph) -> Result<Vec<(Tensor, Tensor)>> {
    let cfg = graph.config();
    let (f, s) = (cfg.scale_factor, cfg.level_scale(1));
    let m = f / gcd(f, s) * s;
    data.images
        .iter()
        .filter(|im| im.shape()[2] >= m && im.shape()[3] >= m)
        .map(|im| {
            let (h, w) = (im.shape()[2] / m * m, im.shape()[3] / m * m);
            let hr = im.crop(&[0, 0, 0, 0], &[1, im.channels(), h, w])?;
            Ok((impair(&hr, f)?, hr))
        })
        .collect()
}

/// Scores a generator; lower is better.
pub trait Validator {
    fn score(&self, graph: &NetworkGraph, pairs: &[(Tensor, Tensor)]) -> Result<f64>;
}

/// Mean squared error at zero noise.
#[derive(Clone, Copy, Debug, Default)]
pub struct FidelityValidator;

impl Validator for FidelityValidator {
    fn score(&self, graph: &NetworkGraph, pairs: &[(Tensor, Tensor)]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::Config("no validation images".into()));
        }
        let mut total = 0.0;
        for (x, y) in pairs {
            total += metrics::mse(&graph.forward(x, 0, 0.0)?, y)?;
        }
        Ok(total / pairs.len() as f64)
    }
}

/// Stand-in for a no-reference perceptual index: RMSE at zero noise plus the
/// gap between the mean `|VN|` statistic of the noisy output and that of the
/// reference.
#[derive(Clone, Copy, Debug)]
pub struct PerceptualValidator {
    pub amplitude: f64,
    pub seed: u64,
}

impl Validator for PerceptualValidator {
    fn score(&self, graph: &NetworkGraph, pairs: &[(Tensor, Tensor)]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::Config("no validation images".into()));
        }
        let mut total = 0.0;
        for (x, y) in pairs {
            let rmse = metrics::rmse(&graph.forward(x, 0, 0.0)?, y)?;
            let (vn_out, _) = vn_statistics(&graph.forward(x, self.seed, self.amplitude)?)?;
            let (vn_ref, _) = vn_statistics(y)?;
            total += rmse + (vn_out - vn_ref).abs();
        }
        Ok(total / pairs.len() as f64)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: ParamStore,
}

fn zero_noise(x: &Tensor) -> Tensor {
    NetworkGraph::noise(x.shape(), 0, 0.0)
}

fn maybe_validate(
    step: u64,
    cfg: &TrainConfig,
    graph: &NetworkGraph,
    pairs: &[(Tensor, Tensor)],
    validator: &dyn Validator,
    best: &mut Option<Checkpoint>,
) -> Result<Option<f64>> {
    let due = (step + 1).is_multiple_of(cfg.validate_every) || step + 1 == cfg.max_steps;
    if !due {
        return Ok(None);
    }
    let v = validator.score(graph, pairs)?;
    if best.as_ref().is_none_or(|b| v < b.validation) {
        *best = Some(Checkpoint {
            step: step + 1,
            params: graph.params().clone(),
            validation: v,
            mode: cfg.mode,
        });
    }
    Ok(Some(v))
}

fn finish(graph: &NetworkGraph, best: Option<Checkpoint>, cfg: &TrainConfig) -> TrainOutcome {
    TrainOutcome {
        best: best.unwrap_or_else(|| Checkpoint {
            step: 0,
            params: graph.params().clone(),
            validation: f64::INFINITY,
            mode: cfg.mode,
        }),
        last: graph.params().clone(),
    }
}

/// Minimizes the high-fidelity loss at zero noise with Adam, keeping the
/// parameters with the best validation score.
pub fn train_fidelity(
    graph: &mut NetworkGraph,
    data: &Dataset,
    validation: &[(Tensor, Tensor)],
    cfg: &TrainConfig,
    validator: &dyn Validator,
    mut observe: impl FnMut(&StepLog),
) -> Result<TrainOutcome> {
    let factor = graph.config().scale_factor;
    cfg.validate(factor)?;
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::default();
    let mut best = None;
    for step in 0..cfg.max_steps {
        let batch = sample_patches(data, cfg, factor, &mut rng)?;
        let mut tape = Tape::new();
        let target = tape.constant(batch.target);
        let noise = zero_noise(&batch.input);
        let y = graph.forward_on(&mut tape, batch.input, noise)?;
        let loss = high_fidelity_loss_var(&mut tape, y, target, factor)?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Contract(format!("non-finite loss at step {step}")));
        }
        let grads = tape.backward(loss, None)?;
        let lr = cfg.learning_rate_at(step);
        adam_step(graph.params_mut(), &grads, &mut adam, lr, &cfg.adam)?;
        let v = maybe_validate(step, cfg, graph, validation, validator, &mut best)?;
        observe(&StepLog {
            step,
            lr,
            terms: vec![("fidelity".into(), value)],
            validation: v,
        });
    }
    Ok(finish(graph, best, cfg))
}

/// Alternates one discriminator step on the relativistic loss with one
/// generator step on the total perceptual loss.
#[allow(clippy::too_many_arguments)]
pub fn train_perceptual(
    graph: &mut NetworkGraph,
    disc: &mut Discriminator,
    data: &Dataset,
    validation: &[(Tensor, Tensor)],
    cfg: &TrainConfig,
    weights: &LossWeights,
    cx: &dyn ContextualLoss,
    validator: &dyn Validator,
    mut observe: impl FnMut(&StepLog),
) -> Result<TrainOutcome> {
    let factor = graph.config().scale_factor;
    cfg.validate(factor)?;
    weights.validate()?;
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gen_adam = AdamState::default();
    let mut disc_adam = AdamState::default();
    let mut best = None;
    let w = cfg.perceptual_amplitude;
    for step in 0..cfg.max_steps {
        let batch = sample_patches(data, cfg, factor, &mut rng)?;
        let noise_seed: u64 = rng.random();
        let noise = NetworkGraph::noise(batch.input.shape(), noise_seed, w);
        let lr = cfg.learning_rate_at(step);

        // discriminator step on a detached fake
        let fake = graph.forward_with_noise(&batch.input, &noise)?;
        let mut tape = Tape::new();
        let real = tape.constant(batch.target.clone());
        let fake = tape.constant(fake);
        let c_real = disc.score_image(&mut tape, real)?;
        let c_fake = disc.score_image(&mut tape, fake)?;
        let (ld, _) = rsgan_losses_var(&mut tape, c_real, c_fake)?;
        let ld_value = tape.value(ld).data()[0];
        let grads = tape.backward(ld, None)?;
        adam_step(disc.params_mut(), &grads, &mut disc_adam, lr, &cfg.adam)?;

        // generator step
        let mut tape = Tape::new();
        let x = tape.constant(batch.target);
        let y1 = graph.forward_on(&mut tape, batch.input.clone(), noise)?;
        let clean = zero_noise(&batch.input);
        let y0 = graph.forward_on(&mut tape, batch.input, clean)?;
        let terms = total_perceptual_loss(&mut tape, y1, y0, x, disc, weights, factor, cx)?;
        let mut log_terms = vec![("disc".to_string(), ld_value)];
        for (name, v) in [
            ("gan", terms.gan),
            ("cycle_noisy", Some(terms.cycle_noisy)),
            ("cx", terms.cx),
            ("l1", Some(terms.l1)),
            ("cycle_clean", Some(terms.cycle_clean)),
            ("total", Some(terms.total)),
        ] {
            if let Some(v) = v {
                log_terms.push((name.to_string(), tape.value(v).data()[0]));
            }
        }
        if log_terms.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite loss at step {step}")));
        }
        let grads = tape.backward(terms.total, None)?;
        adam_step(graph.params_mut(), &grads, &mut gen_adam, lr, &cfg.adam)?;

        let v = maybe_validate(step, cfg, graph, validation, validator, &mut best)?;
        observe(&StepLog {
            step,
            lr,
            terms: log_terms,
            validation: v,
        });
    }
    let mut out = finish(graph, best, cfg);
    out.best.mode = TrainMode::Perceptual;
    Ok(out)
}
