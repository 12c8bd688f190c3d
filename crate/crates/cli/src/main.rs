use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;
mod images;
mod rundir;

#[derive(Parser, Debug, Serialize)]
#[command(name = "mgbp", version, about = "Multi-grid back-projection super-resolution")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Run configuration document (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in model instead of --config: v2-x2, v2-x3, v2-x4, v2-x8, v2-x16, 3d-x4, 3d-x16.
    #[arg(long, global = true, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Overrides the run and training seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory; every output of the command goes here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Generator checkpoint (MGBPCKPT) written for the same model.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    /// Noise amplitude W fed to the generator.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub noise_amp: f64,
    /// Tile extent as T,Y,X.
    #[arg(long, global = true, value_parser = parse_tile)]
    pub tile: Option<[usize; 3]>,
    /// Temporal separation between video tiles [default: 5].
    #[arg(long, global = true)]
    pub stride_frames: Option<usize>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Print the unfolded module list, shapes, parameters and cost.
    Describe {
        /// Traced input extent, H,W or T,H,W.
        #[arg(long, value_parser = parse_size)]
        size: Option<Extent>,
    },
    /// Train on the images listed in the configuration.
    Train,
    /// Super-resolve PNG images with tiled inference.
    Infer {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Treat inputs as high-resolution references: impair, restore and score.
        #[arg(long)]
        degrade: bool,
    },
    /// Super-resolve a directory of PNG frames with a video model.
    InferVideo {
        frames: PathBuf,
        #[arg(long)]
        degrade: bool,
    },
    /// Score a reference image at several noise amplitudes.
    Sweep {
        image: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1.0")]
        amps: Vec<f64>,
    },
    /// Impulse responses of the network frozen at an input image.
    Dfv {
        image: PathBuf,
        /// Input pixel as Y,X; repeat for several.
        #[arg(long = "pixel", required = true, value_parser = parse_pair)]
        pixels: Vec<[usize; 2]>,
        #[arg(long)]
        degrade: bool,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[arg(long, value_parser = parse_size)]
        size: Option<Extent>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Also check the perceptual objective with the configured discriminator.
        #[arg(long)]
        perceptual: bool,
    },
    /// Counted MACs and memory against the recurrence model.
    Analyze {
        #[arg(long, value_parser = parse_size)]
        size: Option<Extent>,
    },
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

fn parse_tile(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)?
        .try_into()
        .map_err(|_| "expected T,Y,X".to_string())
}

fn parse_pair(s: &str) -> Result<[usize; 2], String> {
    parse_list(s)?.try_into().map_err(|_| "expected Y,X".to_string())
}

/// A traced input extent, `H,W` or `T,H,W`.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
pub struct Extent(pub Vec<usize>);

fn parse_size(s: &str) -> Result<Extent, String> {
    let v = parse_list(s)?;
    if !(2..=3).contains(&v.len()) || v.contains(&0) {
        return Err("expected H,W or T,H,W with positive entries".into());
    }
    Ok(Extent(v))
}

/// Worker cap from `MGBP_THREADS`, else the available parallelism.
pub fn threads() -> Result<usize> {
    match std::env::var("MGBP_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("MGBP_THREADS=`{v}`"))?;
            if n == 0 {
                bail!("MGBP_THREADS must be >= 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<()> {
    threads()?;
    let invocation = serde_json::to_value(&cli)?;
    let c = &cli.common;
    match cli.command {
        Command::Describe { size } => commands::describe(c, size.map(|e| e.0), &invocation),
        Command::Train => commands::train(c, &invocation),
        Command::Infer { inputs, degrade } => commands::infer(c, &inputs, degrade, &invocation),
        Command::InferVideo { frames, degrade } => commands::infer_video(c, &frames, degrade, &invocation),
        Command::Sweep { image, amps } => commands::sweep(c, &image, &amps, &invocation),
        Command::Dfv {
            image,
            pixels,
            degrade,
            delta,
        } => commands::dfv(c, &image, &pixels, degrade, delta, &invocation),
        Command::Gradcheck {
            size,
            samples,
            perceptual,
        } => commands::gradcheck(c, size.map(|e| e.0), samples, perceptual, &invocation),
        Command::Analyze { size } => commands::analyze(c, size.map(|e| e.0), &invocation),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
