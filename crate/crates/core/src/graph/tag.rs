use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModuleKind {
    Analysis,
    Synthesis,
    Downscale,
    Upscale,
}

/// Identity of one parameterized module in the unfolded network.
///
/// Scalers carry the full step path `[s_L, …, s_k]` of the back-projection
/// calls enclosing them, so every Upscaler/Downscaler instance in the W-cycle
/// owns its parameters. The last path entry is the step index within its own
/// block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModuleTag {
    pub kind: ModuleKind,
    pub level: usize,
    pub path: Vec<usize>,
}

impl ModuleTag {
    pub fn analysis(level: usize) -> Self {
        ModuleTag {
            kind: ModuleKind::Analysis,
            level,
            path: Vec::new(),
        }
    }

    pub fn synthesis(level: usize) -> Self {
        ModuleTag {
            kind: ModuleKind::Synthesis,
            level,
            path: Vec::new(),
        }
    }

    pub fn down(level: usize, path: &[usize]) -> Self {
        ModuleTag {
            kind: ModuleKind::Downscale,
            level,
            path: path.to_vec(),
        }
    }

    pub fn up(level: usize, path: &[usize]) -> Self {
        ModuleTag {
            kind: ModuleKind::Upscale,
            level,
            path: path.to_vec(),
        }
    }

    pub fn step(&self) -> Option<usize> {
        self.path.last().copied()
    }

    pub fn weight_key(&self) -> String {
        format!("{self}.weight")
    }

    pub fn bias_key(&self) -> String {
        format!("{self}.bias")
    }
}

impl fmt::Display for ModuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ModuleKind::Analysis => "analysis",
            ModuleKind::Synthesis => "synthesis",
            ModuleKind::Downscale => "down",
            ModuleKind::Upscale => "up",
        };
        write!(f, "{kind}.k{}", self.level)?;
        if !self.path.is_empty() {
            let p: Vec<String> = self.path.iter().map(|s| s.to_string()).collect();
            write!(f, ".s{}", p.join("-"))?;
        }
        Ok(())
    }
}

impl FromStr for ModuleTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("malformed module tag `{s}`"));
        let mut parts = s.split('.');
        let kind = match parts.next() {
            Some("analysis") => ModuleKind::Analysis,
            Some("synthesis") => ModuleKind::Synthesis,
            Some("down") => ModuleKind::Downscale,
            Some("up") => ModuleKind::Upscale,
            _ => return Err(bad()),
        };
        let level = parts
            .next()
            .and_then(|p| p.strip_prefix('k'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        let path = match parts.next() {
            None => Vec::new(),
            Some(p) => p
                .strip_prefix('s')
                .ok_or_else(bad)?
                .split('-')
                .map(|x| x.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(ModuleTag { kind, level, path })
    }
}
