use serde::{Deserialize, Serialize};

use super::discriminator::Discriminator;
use crate::autograd::{softplus, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Direction, Tensor};

/// Downscaling factors of the consistency pyramid: powers of two below `f`,
/// then `f` itself (`4 → [2, 4]`, `3 → [2, 3]`).
pub fn factor_pyramid(f: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p < f {
        out.push(p);
        p *= 2;
    }
    if f >= 2 {
        out.push(f);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub gan: f64,
    pub cycle: f64,
    pub cx: f64,
    pub l1: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gan: 0.001,
            cycle: 10.0,
            cx: 0.1,
            l1: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("gan", self.gan), ("cycle", self.cycle), ("cx", self.cx), ("l1", self.l1)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("loss_weights.{name}: must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }

    /// Coefficients in the order the total loss applies them:
    /// GAN, cycle on `Y_{W=1}`, CX, L1 on `Y_{W=0}`, cycle on `Y_{W=0}`.
    pub fn coefficients(&self) -> [f64; 5] {
        [self.gan, self.cycle, self.cx, self.l1, self.cycle]
    }
}

/// Contextual-loss term of the perceptual objective.
pub trait ContextualLoss {
    /// `None` is the zero functional.
    fn loss(&self, tape: &mut Tape, y: Var, x: Var) -> Result<Option<Var>>;
}

/// The default: contributes nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoContextual;

impl ContextualLoss for NoContextual {
    fn loss(&self, _tape: &mut Tape, _y: Var, _x: Var) -> Result<Option<Var>> {
        Ok(None)
    }
}

/// `(L_D, L_G)` as tape scalars: means of `softplus(−(C_r − C_f))` and
/// `softplus(−(C_f − C_r))`.
pub fn rsgan_losses_var(tape: &mut Tape, c_real: Var, c_fake: Var) -> Result<(Var, Var)> {
    let d = tape.sub(c_real, c_fake)?;
    let nd = tape.scale(d, -1.0);
    let ld = tape.softplus(nd);
    let ld = tape.mean(ld);
    let lg = tape.softplus(d);
    let lg = tape.mean(lg);
    Ok((ld, lg))
}

pub fn rsgan_losses(c_real: &[f64], c_fake: &[f64]) -> Result<(f64, f64)> {
    if c_real.len() != c_fake.len() || c_real.is_empty() {
        return Err(Error::dim("scores", c_real.len(), c_fake.len()));
    }
    let n = c_real.len() as f64;
    let (mut ld, mut lg) = (0.0, 0.0);
    for (&r, &f) in c_real.iter().zip(c_fake) {
        ld += softplus(-(r - f));
        lg += softplus(-(f - r));
    }
    Ok((ld / n, lg / n))
}

/// `(1/|P|)·Σ_{k∈P} L1(S_k(y), S_k(x))` over the factor pyramid `P`.
pub fn cycle_loss_var(tape: &mut Tape, y: Var, x: Var, factor: usize) -> Result<Var> {
    let pyramid = factor_pyramid(factor);
    let mut acc: Option<Var> = None;
    for &k in &pyramid {
        let sy = tape.bicubic(y, k, Direction::Down)?;
        let sx = tape.bicubic(x, k, Direction::Down)?;
        let term = tape.l1(sy, sx)?;
        acc = Some(match acc {
            None => term,
            Some(a) => tape.add(a, term)?,
        });
    }
    let sum = acc.ok_or_else(|| Error::Config(format!("no pyramid for factor {factor}")))?;
    Ok(tape.scale(sum, 1.0 / pyramid.len() as f64))
}

/// `L1(Y₀, X) + Σ_{k∈P} L1(S_k(Y₀), S_k(X))`.
pub fn high_fidelity_loss_var(tape: &mut Tape, y0: Var, x: Var, factor: usize) -> Result<Var> {
    tape.value(y0).check_same_shape(tape.value(x))?;
    let mut acc = tape.l1(y0, x)?;
    for k in factor_pyramid(factor) {
        let sy = tape.bicubic(y0, k, Direction::Down)?;
        let sx = tape.bicubic(x, k, Direction::Down)?;
        let term = tape.l1(sy, sx)?;
        acc = tape.add(acc, term)?;
    }
    Ok(acc)
}

pub fn high_fidelity_loss(y0: &Tensor, x: &Tensor, factor: usize) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(y0.clone());
    let b = tape.constant(x.clone());
    let l = high_fidelity_loss_var(&mut tape, a, b, factor)?;
    Ok(tape.value(l).data()[0])
}

/// The individual weighted-sum terms, unweighted, plus the total.
#[derive(Clone, Copy, Debug)]
pub struct PerceptualTerms {
    pub total: Var,
    pub gan: Option<Var>,
    pub cycle_noisy: Var,
    pub cx: Option<Var>,
    pub l1: Var,
    pub cycle_clean: Var,
}

/// Generator objective for perceptual training:
/// `w_gan·L_G + w_cycle·cycle(Y₁) + w_cx·CX(Y₁) + w_l1·L1(Y₀, X) + w_cycle·cycle(Y₀)`.
///
/// With a zero GAN weight the discriminator is never evaluated.
#[allow(clippy::too_many_arguments)]
pub fn total_perceptual_loss(
    tape: &mut Tape,
    y1: Var,
    y0: Var,
    x: Var,
    disc: &Discriminator,
    weights: &LossWeights,
    factor: usize,
    cx: &dyn ContextualLoss,
) -> Result<PerceptualTerms> {
    let [w_gan, w_cyc1, w_cx, w_l1, w_cyc0] = weights.coefficients();
    let mut parts = Vec::new();
    let gan = if w_gan != 0.0 {
        let c_real = disc.score_image(tape, x)?;
        let c_fake = disc.score_image(tape, y1)?;
        let (_, lg) = rsgan_losses_var(tape, c_real, c_fake)?;
        parts.push(tape.scale(lg, w_gan));
        Some(lg)
    } else {
        None
    };
    let cycle_noisy = cycle_loss_var(tape, y1, x, factor)?;
    parts.push(tape.scale(cycle_noisy, w_cyc1));
    let cx_term = if w_cx != 0.0 { cx.loss(tape, y1, x)? } else { None };
    if let Some(c) = cx_term {
        parts.push(tape.scale(c, w_cx));
    }
    let l1 = tape.l1(y0, x)?;
    parts.push(tape.scale(l1, w_l1));
    let cycle_clean = cycle_loss_var(tape, y0, x, factor)?;
    parts.push(tape.scale(cycle_clean, w_cyc0));
    let mut total = parts[0];
    for &p in &parts[1..] {
        total = tape.add(total, p)?;
    }
    Ok(PerceptualTerms {
        total,
        gan,
        cycle_noisy,
        cx: cx_term,
        l1,
        cycle_clean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramids() {
        assert_eq!(factor_pyramid(2), vec![2]);
        assert_eq!(factor_pyramid(3), vec![2, 3]);
        assert_eq!(factor_pyramid(4), vec![2, 4]);
        assert_eq!(factor_pyramid(16), vec![2, 4, 8, 16]);
    }

    #[test]
    fn rsgan_closed_forms() {
        let (ld, lg) = rsgan_losses(&[0.3], &[0.3]).unwrap();
        assert!((ld - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((lg - std::f64::consts::LN_2).abs() < 1e-12);
        let (ld, lg) = rsgan_losses(&[20.0], &[0.0]).unwrap();
        let e = (-20.0f64).exp();
        assert!((ld - (e - e * e / 2.0)).abs() < 1e-20);
        assert!((lg - (20.0 + e.ln_1p())).abs() < 1e-12);
        let (a, b) = rsgan_losses(&[1.5, -2.0], &[0.25, 3.0]).unwrap();
        let (c, d) = rsgan_losses(&[0.25, 3.0], &[1.5, -2.0]).unwrap();
        assert_eq!((a, b), (d, c));
    }

    #[test]
    fn fidelity_offset_counts_terms() {
        let x = Tensor::from_fn(&[1, 3, 16, 16], |i| (i % 29) as f64);
        let y = x.map(|v| v + 1.0);
        assert_eq!(high_fidelity_loss(&x, &x, 4).unwrap(), 0.0);
        assert!((high_fidelity_loss(&y, &x, 4).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_follow_objective_order() {
        assert_eq!(LossWeights::default().coefficients(), [0.001, 10.0, 0.1, 10.0, 10.0]);
    }
}
