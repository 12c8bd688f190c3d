//! The divide-and-conquer cost recurrence and exact operation counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{trace_shapes, MgbpConfig, ModuleKind, ShapeTrace};

/// Cost of one back-projection level, as a function of its pixel count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LevelCost {
    Constant(f64),
    /// `c·n^α`.
    Power { c: f64, alpha: f64 },
    /// Explicit integer cost per level, index `k − 1`.
    PerLevel(Vec<u128>),
}

/// `p_k = f(n_k) + μ·p_{k−1}` with `p_1 = f(n_1)`, `n_k = ⌊n / shrink^(L−k)⌋`,
/// plus a level-independent overhead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub f: LevelCost,
    pub steps: usize,
    pub levels: usize,
    /// Pixels at the top level.
    pub base_pixels: u64,
    /// Pixel ratio between adjacent levels.
    pub shrink: u64,
    pub overhead: u128,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.steps == 0 || self.shrink == 0 {
            return Err(Error::Config("cost model needs levels, steps and shrink >= 1".into()));
        }
        match &self.f {
            LevelCost::Constant(c) if *c < 0.0 => Err(Error::Config("constant cost must be >= 0".into())),
            LevelCost::Power { c, alpha } if !(*c > 0.0 && *alpha >= 0.0) => {
                Err(Error::Config("power cost needs c > 0 and alpha >= 0".into()))
            }
            LevelCost::PerLevel(v) if v.len() != self.levels => {
                Err(Error::dim("per-level costs", self.levels, v.len()))
            }
            _ => Ok(()),
        }
    }

    /// Pixels at level `k` (integer floor).
    pub fn pixels(&self, k: usize) -> u64 {
        self.base_pixels / self.shrink.pow((self.levels - k) as u32)
    }

    pub fn level_cost(&self, k: usize) -> f64 {
        match &self.f {
            LevelCost::Constant(c) => *c,
            LevelCost::Power { c, alpha } => c * (self.pixels(k) as f64).powf(*alpha),
            LevelCost::PerLevel(v) => v[k - 1] as f64,
        }
    }
}

/// Evaluates the finite recurrence.
pub fn recurrence_cost(model: &CostModel) -> Result<f64> {
    model.validate()?;
    let mu = model.steps as f64;
    let mut p = 0.0;
    for k in 1..=model.levels {
        p = model.level_cost(k) + mu * p;
    }
    Ok(p + model.overhead as f64)
}

/// Integer evaluation; only defined for per-level integer costs.
pub fn recurrence_cost_exact(model: &CostModel) -> Result<u128> {
    model.validate()?;
    let LevelCost::PerLevel(costs) = &model.f else {
        return Err(Error::Unsupported("exact recurrence needs per-level integer costs".into()));
    };
    let mu = model.steps as u128;
    let mut p: u128 = 0;
    for &c in costs {
        p = c + mu * p;
    }
    Ok(p + model.overhead)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: usize,
    pub pixels: u64,
    pub channels: usize,
    /// MACs of one Downscaler leaving this level (0 at level 1).
    pub down_macs: u128,
    /// MACs of one Upscaler entering this level (0 at level 1).
    pub up_macs: u128,
    /// Scaler pairs executed at this level.
    pub instances: usize,
    pub analysis_macs: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total_macs: u128,
    pub analysis_macs: u128,
    pub synthesis_macs: u128,
    pub levels: Vec<LevelCount>,
    pub peak_activation_bytes: usize,
    pub parameter_bytes: usize,
    pub steps: usize,
}

impl CostReport {
    /// Per-level back-projection cost `f_k = μ·(d_k + u_k)` (zero at level 1).
    pub fn level_costs(&self) -> Vec<u128> {
        self.levels
            .iter()
            .map(|l| self.steps as u128 * (l.down_macs + l.up_macs))
            .collect()
    }

    /// The recurrence model whose levels are these counted costs.
    pub fn calibrated_model(&self) -> CostModel {
        let top = self.levels.last().expect("levels >= 1");
        let shrink = if self.levels.len() > 1 {
            top.pixels / self.levels[self.levels.len() - 2].pixels.max(1)
        } else {
            4
        };
        CostModel {
            f: LevelCost::PerLevel(self.level_costs()),
            steps: self.steps,
            levels: self.levels.len(),
            base_pixels: top.pixels,
            shrink,
            overhead: self.analysis_macs + self.synthesis_macs,
        }
    }

    /// Least-squares slope of `log f_k` against `log n_k` over levels with
    /// nonzero cost.
    pub fn fitted_exponent(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .levels
            .iter()
            .zip(self.level_costs())
            .filter(|(_, c)| *c > 0)
            .map(|(l, c)| ((l.pixels as f64).ln(), (c as f64).ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }

    pub fn to_lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "total_macs={} analysis={} synthesis={} peak_activation_bytes={} parameter_bytes={}",
            self.total_macs, self.analysis_macs, self.synthesis_macs, self.peak_activation_bytes, self.parameter_bytes
        )];
        for l in &self.levels {
            out.push(format!(
                "level {} pixels={} channels={} down={} up={} instances={}",
                l.level, l.pixels, l.channels, l.down_macs, l.up_macs, l.instances
            ));
        }
        out
    }
}

fn per_instance(trace: &ShapeTrace, kind: ModuleKind, k: usize) -> Result<(u128, usize)> {
    let macs: Vec<u64> = trace
        .modules
        .iter()
        .filter(|m| m.tag.kind == kind && m.tag.level == k)
        .map(|m| m.macs)
        .collect();
    match macs.first() {
        None => Ok((0, 0)),
        Some(&m) if macs.iter().all(|&x| x == m) => Ok((m as u128, macs.len())),
        Some(_) => Err(Error::Contract(format!("{kind:?} modules at level {k} differ in cost"))),
    }
}

/// Exact MAC and memory counts of the unfolded generator on `input_shape`.
pub fn count_ops(config: &MgbpConfig, input_shape: &[usize]) -> Result<CostReport> {
    let trace = trace_shapes(config, input_shape)?;
    let mut levels = Vec::with_capacity(config.levels);
    let mut analysis = 0u128;
    for k in 1..=config.levels {
        let (d, dn) = per_instance(&trace, ModuleKind::Downscale, k)?;
        let (u, un) = per_instance(&trace, ModuleKind::Upscale, k)?;
        if dn != un {
            return Err(Error::Contract(format!("level {k} has {dn} downscalers but {un} upscalers")));
        }
        let a = trace.macs_of(ModuleKind::Analysis, k) as u128;
        analysis += a;
        let y = trace
            .modules
            .iter()
            .find(|m| m.tag.kind == ModuleKind::Analysis && m.tag.level == k)
            .ok_or_else(|| Error::Contract(format!("no analysis module at level {k}")))?;
        let nd = y.output.len();
        levels.push(LevelCount {
            level: k,
            pixels: (y.output[nd - 2] * y.output[nd - 1]) as u64,
            channels: config.channels(k),
            down_macs: d,
            up_macs: u,
            instances: dn,
            analysis_macs: a,
        });
    }
    let synthesis = trace
        .modules
        .iter()
        .filter(|m| m.tag.kind == ModuleKind::Synthesis)
        .map(|m| m.macs as u128)
        .sum();
    Ok(CostReport {
        total_macs: trace.total_macs() as u128,
        analysis_macs: analysis,
        synthesis_macs: synthesis,
        levels,
        peak_activation_bytes: trace.peak_activation_bytes,
        parameter_bytes: trace.parameter_bytes,
        steps: config.steps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub predicted: f64,
    pub counted: u128,
    /// `|predicted − counted| / counted`.
    pub gap: f64,
    pub fitted_exponent: Option<f64>,
}

pub fn compare(model: &CostModel, config: &MgbpConfig, input_shape: &[usize]) -> Result<Comparison> {
    let report = count_ops(config, input_shape)?;
    let predicted = recurrence_cost(model)?;
    let counted = report.total_macs;
    Ok(Comparison {
        predicted,
        counted,
        gap: (predicted - counted as f64).abs() / (counted as f64).max(1.0),
        fitted_exponent: report.fitted_exponent(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(f: LevelCost, steps: usize, levels: usize) -> CostModel {
        CostModel {
            f,
            steps,
            levels,
            base_pixels: 4096,
            shrink: 4,
            overhead: 0,
        }
    }

    #[test]
    fn constant_unrolls() {
        assert_eq!(recurrence_cost(&model(LevelCost::Constant(5.0), 2, 3)).unwrap(), 35.0);
        let m = model(LevelCost::Power { c: 1.0, alpha: 1.0 }, 1, 3);
        assert_eq!(recurrence_cost(&m).unwrap(), 4096.0 + 1024.0 + 256.0);
    }

    #[test]
    fn linear_cost_with_two_steps_is_geometric() {
        let m = CostModel {
            base_pixels: 1 << 40,
            ..model(LevelCost::Power { c: 1.0, alpha: 1.0 }, 2, 20)
        };
        assert!(recurrence_cost(&m).unwrap() <= 2.0 * (1u64 << 40) as f64);
    }

    #[test]
    fn exact_needs_integers() {
        assert!(recurrence_cost_exact(&model(LevelCost::Constant(1.0), 2, 2)).is_err());
        assert_eq!(recurrence_cost_exact(&model(LevelCost::PerLevel(vec![0, 3, 5]), 2, 3)).unwrap(), 5 + 2 * 3);
    }

    #[test]
    fn calibrated_model_reproduces_counts() {
        let cfg = MgbpConfig::toy(3, 2, 3);
        let r = count_ops(&cfg, &[1, 3, 16, 16]).unwrap();
        assert_eq!(recurrence_cost_exact(&r.calibrated_model()).unwrap(), r.total_macs);
    }
}
