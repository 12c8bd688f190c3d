//! Central finite differences against the tape's analytic gradients.
//!
//! The checker only ever evaluates forward values; backward rules are not on
//! its path, so it is an independent oracle for them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{kink_signature, record_forward, Tape, Var};
use crate::error::{Error, Result};
use crate::ParamStore;

#[derive(Clone, Debug)]
pub struct FdCheck {
    /// Central-difference step.
    pub h: f64,
    /// Coordinates to sample (all of them if fewer exist).
    pub samples: usize,
    pub seed: u64,
    /// Denominator floor of the relative error, so coordinates with
    /// vanishing gradients are judged on absolute error.
    pub floor: f64,
}

impl Default for FdCheck {
    fn default() -> Self {
        FdCheck {
            h: 1e-5,
            samples: 50,
            seed: 0,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates rejected because a relu or |·| changed sign within ±h.
    pub skipped_kinks: usize,
    /// `(key, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

fn eval(f: &impl Fn(&mut Tape, &ParamStore) -> Result<Var>, params: &ParamStore) -> Result<(f64, Vec<bool>)> {
    let (out, tape, _) = record_forward(|t, p| f(t, p), params)?;
    if out.len() != 1 {
        return Err(Error::Contract(format!(
            "finite-difference check needs a scalar output, got shape {:?}",
            out.shape()
        )));
    }
    Ok((out.data()[0], kink_signature(&tape)))
}

/// Worst relative error between analytic and central-difference gradients
/// over randomly sampled coordinates of `params`.
///
/// A coordinate whose ±h evaluations flip any relu or |·| input sign relative
/// to the unperturbed pass sits on a kink and is resampled; this keeps the
/// sampled pre-activations clear of the kink by more than the step.
pub fn finite_diff_check<F>(f: F, params: &ParamStore, cfg: &FdCheck) -> Result<FdReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let (_, mut tape, out) = record_forward(|t, p| f(t, p), params)?;
    if tape.value(out).len() != 1 {
        return Err(Error::Contract(format!(
            "finite-difference check needs a scalar output, got shape {:?}",
            tape.value(out).shape()
        )));
    }
    let base_sig = kink_signature(&tape);
    let grads = tape.backward(out, None)?;

    let keys: Vec<(&String, usize)> = params.iter().map(|(k, v)| (k, v.len())).collect();
    let total: usize = keys.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Contract("no parameters to check".into()));
    }
    let locate = |mut flat: usize| -> (&String, usize) {
        for &(k, n) in &keys {
            if flat < n {
                return (k, flat);
            }
            flat -= n;
        }
        unreachable!("flat index within total")
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let exhaustive = total <= cfg.samples;
    let target = cfg.samples.min(total);
    let mut report = FdReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        worst: None,
    };
    let mut next_flat = 0usize;
    let max_attempts = target * 20 + 20;
    let mut attempts = 0;
    let mut work = params.clone();
    while report.checked < target && attempts < max_attempts {
        attempts += 1;
        let flat = if exhaustive {
            if next_flat >= total {
                break;
            }
            next_flat += 1;
            next_flat - 1
        } else {
            rng.random_range(0..total)
        };
        let (key, idx) = locate(flat);
        let orig = params[key].data()[idx];
        work.get_mut(key).unwrap().data_mut()[idx] = orig + cfg.h;
        let (fp, sp) = eval(&f, &work)?;
        work.get_mut(key).unwrap().data_mut()[idx] = orig - cfg.h;
        let (fm, sm) = eval(&f, &work)?;
        work.get_mut(key).unwrap().data_mut()[idx] = orig;
        if sp != base_sig || sm != base_sig {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * cfg.h);
        let analytic = grads.get(key).map(|g| g.data()[idx]).unwrap_or(0.0);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(cfg.floor);
        report.checked += 1;
        if rel >= report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some((key.clone(), idx, analytic, numeric));
        }
    }
    if report.checked == 0 {
        return Err(Error::Contract("every sampled coordinate sat on a kink".into()));
    }
    Ok(report)
}
