//! Run directories and effective configurations.

use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use mgbp::run::RunConfig;
use mgbp::tiling::TileSettings;
use mgbp::{MgbpConfig, NetworkGraph};
use serde::Serialize;

use crate::Common;

/// A directory that receives every file a command writes.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating run directory {}", root.display()))?;
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    /// `name` must be relative and free of `..`, so the result stays inside.
    pub fn path(&self, name: impl AsRef<Path>) -> Result<PathBuf> {
        let name = name.as_ref();
        if !name.components().all(|c| matches!(c, Component::Normal(_))) {
            bail!("refusing to write `{}` outside the run directory", name.display());
        }
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(p)
    }

    pub fn write(&self, name: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name)?;
        fs::write(&p, contents).with_context(|| format!("{}", p.display()))?;
        Ok(p)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }

    /// Records the effective configuration and the command line.
    pub fn record(&self, cfg: &RunConfig, invocation: &serde_json::Value) -> Result<()> {
        self.write("config.json", cfg.to_json() + "\n")?;
        self.write_json("invocation.json", invocation)?;
        Ok(())
    }
}

pub fn require_out(common: &Common) -> Result<RunDir> {
    let out = common.out.as_ref().context("--out DIR is required")?;
    RunDir::create(out)
}

fn preset(name: &str) -> Result<MgbpConfig> {
    let (kind, factor) = name
        .split_once("-x")
        .with_context(|| format!("unknown preset `{name}`"))?;
    let f: usize = factor.parse().with_context(|| format!("unknown preset `{name}`"))?;
    Ok(match kind {
        "v2" => MgbpConfig::preset_v2(f)?,
        "3d" => MgbpConfig::preset_3d(f)?,
        _ => bail!("unknown preset `{name}`"),
    })
}

fn absolutize(base: &Path, paths: &mut [PathBuf]) -> Result<()> {
    for p in paths {
        if p.is_relative() {
            *p = std::path::absolute(base.join(&*p))?;
        }
    }
    Ok(())
}

/// Loads `--config` or `--preset`, applies command-line overrides and
/// resolves every default.
pub fn effective_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let mut c = RunConfig::load(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            absolutize(base, &mut c.paths.train_images)?;
            absolutize(base, &mut c.paths.validation_images)?;
            c
        }
        (None, Some(name)) => RunConfig::with_model(preset(name)?),
        (None, None) => bail!("either --config PATH or --preset NAME is required"),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    let mut cfg = cfg.resolve()?;
    let tiling: &mut TileSettings = cfg.tiling.as_mut().expect("resolved");
    if let Some(tile) = common.tile {
        tiling.tile = tile;
    }
    if let Some(s) = common.stride_frames {
        if s == 0 {
            bail!("--stride-frames must be >= 1");
        }
        tiling.temporal_stride = s;
    }
    Ok(cfg)
}

/// The generator from `--weights`, or freshly initialized from the run seed.
pub fn generator(common: &Common, cfg: &RunConfig) -> Result<NetworkGraph> {
    match &common.weights {
        Some(p) => NetworkGraph::load(cfg.model.clone(), p).with_context(|| format!("loading {}", p.display())),
        None => Ok(NetworkGraph::build(cfg.model.clone(), cfg.seed)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dir_rejects_escapes() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path()).unwrap();
        assert!(run.path("../x").is_err());
        assert!(run.path("/tmp/x").is_err());
        assert!(run.path("a/b.png").unwrap().starts_with(dir.path()));
    }

    #[test]
    fn presets_parse() {
        assert_eq!(preset("v2-x8").unwrap().levels, 5);
        assert_eq!(preset("3d-x16").unwrap().levels, 6);
        assert!(preset("v2-x5").is_err());
        assert!(preset("nope").is_err());
    }
}
