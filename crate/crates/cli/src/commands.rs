use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mgbp::autograd::{finite_diff_check, record_forward, FdCheck, FdReport, Tape};
use mgbp::complexity::{compare, count_ops};
use mgbp::graph::{trace_shapes, Dims, ModuleKind};
use mgbp::metrics::MetricReport;
use mgbp::perceptual::{high_fidelity_loss_var, total_perceptual_loss, Discriminator, NoContextual};
use mgbp::run::RunConfig;
use mgbp::tensor::io::{save as save_tensor, DType};
use mgbp::tensor::{bicubic_resize, Direction};
use mgbp::tiling::{dfv_impulse_response, plan_tiles, sweep_noise, tiled_infer, TilePlan};
use mgbp::train::{
    impair, train_fidelity, train_perceptual, validation_pairs, Dataset, FidelityValidator, PerceptualValidator,
    StepLog, TrainMode,
};
use mgbp::{MgbpConfig, NetworkGraph, ParamStore, Tensor};
use serde::Serialize;
use serde_json::{json, Value};

use crate::images::{crop_spatial, load_png, pad_replicate, save_png, stack_frames, unstack_frames};
use crate::rundir::{effective_config, generator, require_out};
use crate::{threads, Common};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn round_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

/// Input extent for shape-only commands, rounded up to the lowest-level
/// stride.
fn traced_shape(model: &MgbpConfig, size: Option<Vec<usize>>) -> Result<Vec<usize>> {
    let s = model.level_scale(1);
    let cube = model.dims == Dims::D3;
    let size = size.unwrap_or_else(|| if cube { vec![37, 192, 192] } else { vec![192, 192] });
    let (t, h, w) = match (cube, size.as_slice()) {
        (false, &[h, w]) => (None, h, w),
        (true, &[t, h, w]) => (Some(t), h, w),
        (true, &[h, w]) => (Some(37), h, w),
        _ => bail!("--size: a 2-D model takes H,W"),
    };
    let mut shape = vec![1, model.image_channels];
    shape.extend(t);
    shape.extend([round_up(h, s), round_up(w, s)]);
    Ok(shape)
}

fn kind_name(k: ModuleKind) -> &'static str {
    match k {
        ModuleKind::Analysis => "analysis",
        ModuleKind::Synthesis => "synthesis",
        ModuleKind::Downscale => "down",
        ModuleKind::Upscale => "up",
    }
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

pub fn describe(common: &Common, size: Option<Vec<usize>>, invocation: &Value) -> Result<()> {
    let cfg = effective_config(common)?;
    let m = &cfg.model;
    let graph = NetworkGraph::dry_run(m.clone())?;
    let shape = traced_shape(m, size)?;
    let trace = trace_shapes(m, &shape)?;
    let cube = m.is_cube();
    let mut out = String::new();
    let dims = if cube { "3-D" } else { "2-D" };
    writeln!(out, "MGBP {dims}, scale factor {}, {} levels, {} steps", m.scale_factor, m.levels, m.steps)?;
    writeln!(out, "channels (lowest to highest resolution): {}", join(&m.channels_per_level, "-"))?;
    if cube {
        writeln!(out, "temporal kernels (top stage first): {}", join(&m.temporal_kernels, "-"))?;
    }
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for d in graph.modules() {
        *by_kind.entry(kind_name(d.tag.kind)).or_default() += 1;
    }
    let kinds: Vec<String> = by_kind.iter().map(|(k, n)| format!("{k} {n}")).collect();
    writeln!(out, "modules: {} ({})", graph.modules().len(), kinds.join(", "))?;
    writeln!(out, "leaf back-projections: {}", graph.leaf_invocations())?;
    writeln!(out, "parameters: {}", graph.parameter_count())?;
    writeln!(out, "input {:?} -> output {:?}", trace.input_shape, trace.output_shape)?;
    writeln!(out, "level  scale  channels  frames")?;
    for k in 1..=m.levels {
        writeln!(
            out,
            "{k:>5}  {:>5}  {:>8}  {:>6}",
            m.level_scale(k),
            m.channels(k),
            trace.frames_at_level(k)
        )?;
    }
    if cube {
        writeln!(out, "lowest-level volume saving: {:.1}%", trace.volume_saving() * 100.0)?;
    }
    let shapes: BTreeMap<String, (&Vec<usize>, &Vec<usize>, u64)> = trace
        .modules
        .iter()
        .map(|s| (s.tag.to_string(), (&s.input, &s.output, s.macs)))
        .collect();
    writeln!(out, "{:<24} {:<20} {:>10} {:>12}  shapes", "module", "weight", "params", "macs")?;
    for d in graph.modules() {
        let tag = d.tag.to_string();
        let (i, o, macs) = shapes.get(&tag).copied().context("module missing from trace")?;
        writeln!(
            out,
            "{tag:<24} {:<20} {:>10} {macs:>12}  {i:?} -> {o:?}",
            format!("{:?}", d.weight_shape(cube)),
            d.parameter_count(cube),
        )?;
    }
    for line in count_ops(m, &shape)?.to_lines() {
        writeln!(out, "{line}")?;
    }
    print!("{out}");
    if common.out.is_some() {
        let run = require_out(common)?;
        run.record(&cfg, invocation)?;
        run.write("describe.txt", &out)?;
    }
    Ok(())
}

fn load_dataset(paths: &[PathBuf], what: &str) -> Result<Dataset> {
    if paths.is_empty() {
        bail!("paths.{what} is empty");
    }
    let imgs = paths.iter().map(|p| load_png(p)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(imgs)?)
}

pub fn train(common: &Common, invocation: &Value) -> Result<()> {
    let cfg = effective_config(common)?;
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let data = load_dataset(&cfg.paths.train_images, "train_images")?;
    let val = if cfg.paths.validation_images.is_empty() {
        data.clone()
    } else {
        load_dataset(&cfg.paths.validation_images, "validation_images")?
    };
    let mut graph = generator(common, &cfg)?;
    let pairs = validation_pairs(&val, &graph)?;
    if pairs.is_empty() {
        bail!("no validation image is large enough for the model");
    }
    let mut log = BufWriter::new(File::create(run.path("train_log.jsonl")?)?);
    let mut log_err = None;
    let observe = |s: &StepLog| {
        if let Some(v) = s.validation {
            eprintln!("step {} validation {v:.6}", s.step + 1);
        }
        if log_err.is_none() {
            let line = serde_json::to_string(s).expect("step log serializes");
            log_err = writeln!(log, "{line}").err();
        }
    };
    let outcome = match cfg.train.mode {
        TrainMode::Fidelity => train_fidelity(&mut graph, &data, &pairs, &cfg.train, &FidelityValidator, observe)?,
        TrainMode::Perceptual => {
            let dcfg = cfg.discriminator.clone().expect("resolved");
            let mut disc = Discriminator::build(dcfg, cfg.seed)?;
            let validator = PerceptualValidator {
                amplitude: cfg.train.perceptual_amplitude,
                seed: cfg.seed,
            };
            train_perceptual(
                &mut graph,
                &mut disc,
                &data,
                &pairs,
                &cfg.train,
                &cfg.loss_weights,
                &NoContextual,
                &validator,
                observe,
            )?
        }
    };
    if let Some(e) = log_err {
        return Err(e).context("writing train_log.jsonl");
    }
    log.flush()?;
    graph.set_params(outcome.last)?;
    graph.save(run.path("last.ckpt")?)?;
    graph.set_params(outcome.best.params)?;
    graph.save(run.path("best.ckpt")?)?;
    run.write_json(
        "summary.json",
        &json!({
            "mode": cfg.train.mode,
            "steps": cfg.train.max_steps,
            "best_step": outcome.best.step,
            "best_validation": outcome.best.validation,
            "parameters": graph.parameter_count(),
        }),
    )?;
    println!(
        "best validation {:.6} at step {}; checkpoints in {}",
        outcome.best.validation,
        outcome.best.step,
        run.path("")?.display()
    );
    Ok(())
}

/// Network input at full resolution and, with `degrade`, the reference it
/// was made from.
fn prepare(img: &Tensor, factor: usize, degrade: bool) -> Result<(Tensor, Option<Tensor>)> {
    if degrade {
        let s = img.shape();
        let r = s.len();
        let (h, w) = (s[r - 2] / factor * factor, s[r - 1] / factor * factor);
        if h == 0 || w == 0 {
            bail!("image {:?} is smaller than the scale factor {factor}", &s[r - 2..]);
        }
        let hr = crop_spatial(img, h, w)?;
        Ok((impair(&hr, factor)?, Some(hr)))
    } else {
        Ok((bicubic_resize(img, factor, Direction::Up)?, None))
    }
}

/// Tile plan for `shape`, with the tile clamped to the input and spatial
/// strides kept on the alignment grid.
fn plan_for(cfg: &RunConfig, shape: &[usize]) -> Result<TilePlan> {
    let mut s = cfg.tiling.clone().expect("resolved");
    let r = shape.len();
    let align = s.align;
    for (a, &extent) in [shape[r - 2], shape[r - 1]].iter().enumerate() {
        let t = s.tile[a + 1].min(extent);
        s.tile[a + 1] = (t / align * align).max(align);
    }
    if r == 5 {
        s.tile[0] = s.tile[0].min(shape[2]);
    }
    if s.spatial_stride.is_none() {
        let half = |t: usize| ((t / 2) / align * align).max(align);
        s.spatial_stride = Some([half(s.tile[1]), half(s.tile[2])]);
    }
    Ok(plan_tiles(shape, &s)?)
}

/// Pads to the lowest-level stride, runs tiled inference and crops back.
fn restore(graph: &NetworkGraph, cfg: &RunConfig, common: &Common, x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    let r = s.len();
    let (h, w) = (s[r - 2], s[r - 1]);
    let align = cfg.model.level_scale(1);
    let padded = pad_replicate(x, round_up(h, align), round_up(w, align));
    let plan = plan_for(cfg, padded.shape())?;
    let y = tiled_infer(graph, &padded, &plan, common.noise_amp, cfg.seed, threads()?)?;
    crop_spatial(&y, h, w)
}

fn check_amplitude(w: f64) -> Result<()> {
    if !(w >= 0.0 && w.is_finite()) {
        bail!("--noise-amp must be finite and >= 0, got {w}");
    }
    Ok(())
}

fn output_name(input: &Path) -> Result<String> {
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("{}: unusable file name", input.display()))?;
    Ok(format!("{stem}.png"))
}

pub fn infer(common: &Common, inputs: &[PathBuf], degrade: bool, invocation: &Value) -> Result<()> {
    check_amplitude(common.noise_amp)?;
    let cfg = effective_config(common)?;
    if cfg.model.is_cube() {
        bail!("infer takes a 2-D model; use infer-video");
    }
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let graph = generator(common, &cfg)?;
    let f = cfg.model.scale_factor;
    let mut names = std::collections::BTreeSet::new();
    let mut metrics = Vec::new();
    for input in inputs {
        let name = output_name(input)?;
        if !names.insert(name.clone()) {
            bail!("two inputs map to outputs/{name}");
        }
        let (x, hr) = prepare(&load_png(input)?, f, degrade)?;
        let y = restore(&graph, &cfg, common, &x)?;
        let path = run.path(Path::new("outputs").join(&name))?;
        save_png(&path, &y)?;
        println!("{} -> {}", input.display(), path.display());
        if let Some(hr) = hr {
            for (label, img) in [("mgbp", &y), ("bicubic", &x)] {
                let m = MetricReport::compute(format!("{name}:{label}"), img, &hr, f)?;
                println!("{}", m.to_line());
                metrics.push(m.to_record());
            }
        }
    }
    if !metrics.is_empty() {
        run.write("metrics.jsonl", metrics.join("\n") + "\n")?;
    }
    Ok(())
}

pub fn infer_video(common: &Common, dir: &Path, degrade: bool, invocation: &Value) -> Result<()> {
    check_amplitude(common.noise_amp)?;
    let cfg = effective_config(common)?;
    if !cfg.model.is_cube() {
        bail!("infer-video takes a 3-D model");
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("{}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    files.sort();
    if files.is_empty() {
        bail!("{}: no PNG frames", dir.display());
    }
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let graph = generator(common, &cfg)?;
    let f = cfg.model.scale_factor;
    let frames = files.iter().map(|p| load_png(p)).collect::<Result<Vec<_>>>()?;
    let (x, hr) = prepare(&stack_frames(&frames)?, f, degrade)?;
    let y = restore(&graph, &cfg, common, &x)?;
    let outs = unstack_frames(&y)?;
    let refs = hr.as_ref().map(unstack_frames).transpose()?;
    let inputs = unstack_frames(&x)?;
    let mut metrics = Vec::new();
    for (i, (file, frame)) in files.iter().zip(&outs).enumerate() {
        let name = output_name(file)?;
        save_png(&run.path(Path::new("frames").join(&name))?, frame)?;
        if let Some(refs) = &refs {
            for (label, img) in [("mgbp", frame), ("bicubic", &inputs[i])] {
                let m = MetricReport::compute(format!("{name}:{label}"), img, &refs[i], f)?;
                metrics.push(m.to_record());
            }
        }
    }
    if !metrics.is_empty() {
        run.write("metrics.jsonl", metrics.join("\n") + "\n")?;
    }
    println!("{} frames -> {}", outs.len(), run.path("frames")?.display());
    Ok(())
}

pub fn sweep(common: &Common, image: &Path, amps: &[f64], invocation: &Value) -> Result<()> {
    let cfg = effective_config(common)?;
    if cfg.model.is_cube() {
        bail!("sweep takes a 2-D model");
    }
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let graph = generator(common, &cfg)?;
    let f = cfg.model.scale_factor;
    let m = lcm(f, cfg.model.level_scale(1));
    let img = load_png(image)?;
    let (h, w) = (img.shape()[2] / m * m, img.shape()[3] / m * m);
    if h == 0 || w == 0 {
        bail!("{}: smaller than {m}×{m}", image.display());
    }
    let hr = crop_spatial(&img, h, w)?;
    let x = impair(&hr, f)?;
    let rows = sweep_noise(&graph, &x, &hr, amps, cfg.seed, f)?;
    let mut csv = csv::Writer::from_path(run.path("sweep.csv")?)?;
    println!("{:>6} {:>10} {:>12} {:>10} {:>10} {:>10}", "W", "L1", "L2", "PSNR-Y", "VN|.|", "VN std");
    for r in &rows {
        csv.serialize(r)?;
        let psnr = r.psnr_y.map_or("inf".to_string(), |p| format!("{p:.3}"));
        println!(
            "{:>6.2} {:>10.4} {:>12.4} {:>10} {:>10.4} {:>10.4}",
            r.amplitude, r.l1, r.l2, psnr, r.vn_mean_abs, r.vn_std
        );
    }
    csv.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DfvRecord {
    y: usize,
    x: usize,
    channel: usize,
    /// Sum of the response in the impulse's own channel.
    gain: f64,
    peak: f64,
}

pub fn dfv(
    common: &Common,
    image: &Path,
    pixels: &[[usize; 2]],
    degrade: bool,
    delta: f64,
    invocation: &Value,
) -> Result<()> {
    check_amplitude(common.noise_amp)?;
    let cfg = effective_config(common)?;
    if cfg.model.is_cube() {
        bail!("dfv takes a 2-D model");
    }
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let graph = generator(common, &cfg)?;
    let (x, _) = prepare(&load_png(image)?, cfg.model.scale_factor, degrade)?;
    let s = cfg.model.level_scale(1);
    let (h, w) = (x.shape()[2] / s * s, x.shape()[3] / s * s);
    let x = crop_spatial(&x, h, w)?;
    let mut csv = csv::Writer::from_path(run.path("dfv.csv")?)?;
    for &[py, px] in pixels {
        if py >= h || px >= w {
            bail!("pixel ({py}, {px}) is outside the {h}×{w} network input");
        }
        let mut responses = Vec::new();
        for c in 0..3 {
            let r = dfv_impulse_response(&graph, &x, &[0, c, py, px], delta)?;
            save_tensor(run.path(format!("dfv/y{py}_x{px}_c{c}.mgbt"))?, &r, DType::F64)?;
            let own = r.crop(&[0, c, 0, 0], &[1, 1, h, w])?;
            csv.serialize(DfvRecord {
                y: py,
                x: px,
                channel: c,
                gain: own.sum(),
                peak: own.max_abs(),
            })?;
            responses.push(own);
        }
        // channel c of the picture is the response of channel c to its own impulse
        let peak = responses.iter().map(|r| r.max_abs()).fold(0.0, f64::max).max(1e-300);
        let pic = Tensor::from_fn(&[1, 3, h, w], |i| {
            128.0 + 127.0 * responses[i / (h * w)].data()[i % (h * w)] / peak
        });
        save_png(&run.path(format!("dfv/y{py}_x{px}.png"))?, &pic)?;
        println!("pixel ({py}, {px}): filters in {}", run.path("dfv")?.display());
    }
    csv.flush()?;
    Ok(())
}

/// Deterministic smooth test pattern in `[0, 255]`.
fn pattern(shape: &[usize], phase: f64) -> Tensor {
    let w = *shape.last().expect("rank >= 1");
    Tensor::from_fn(shape, |i| {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        127.5 + 100.0 * ((0.37 * x + phase).sin() * (0.23 * y + 1.7 * phase).cos())
    })
}

#[derive(Serialize)]
struct GradReport {
    objective: &'static str,
    max_rel_error: f64,
    checked: usize,
    skipped_kinks: usize,
    /// `(key, flat index, analytic, numeric)` of the worst coordinate.
    worst: Option<(String, usize, f64, f64)>,
}

impl GradReport {
    fn new(objective: &'static str, r: &FdReport) -> Self {
        GradReport {
            objective,
            max_rel_error: r.max_rel_error,
            checked: r.checked,
            skipped_kinks: r.skipped_kinks,
            worst: r.worst.clone(),
        }
    }
}

const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn gradcheck(
    common: &Common,
    size: Option<Vec<usize>>,
    samples: usize,
    perceptual: bool,
    invocation: &Value,
) -> Result<()> {
    check_amplitude(common.noise_amp)?;
    let cfg = effective_config(common)?;
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let graph = generator(common, &cfg)?;
    let m = &cfg.model;
    let side = 4 * m.level_scale(1);
    let default = if m.is_cube() {
        vec![m.frames_lost_above(1) + 2, side, side]
    } else {
        vec![side, side]
    };
    let shape = traced_shape(m, Some(size.unwrap_or(default)))?;
    let input = pattern(&shape, 0.3);
    let target = pattern(&shape, 1.1);
    let noise = NetworkGraph::noise(&shape, cfg.seed, common.noise_amp);
    let f = m.scale_factor;
    let mut params = graph.params().clone();
    params.insert("input".into(), input.clone());
    let fd = FdCheck {
        samples,
        seed: cfg.seed,
        ..FdCheck::default()
    };
    let fidelity = finite_diff_check(
        |t, _| {
            let x = t.constant(target.clone());
            let y = graph.forward_on(t, input.clone(), noise.clone())?;
            high_fidelity_loss_var(t, y, x, f)
        },
        &params,
        &fd,
    )?;
    let mut reports = vec![GradReport::new("high_fidelity", &fidelity)];
    if perceptual {
        if m.is_cube() {
            bail!("--perceptual needs a 2-D model");
        }
        let mut dcfg = cfg.discriminator.clone().expect("resolved");
        // a zero head would hide the adversarial path from the check
        dcfg.zero_head = false;
        let disc = Discriminator::build(dcfg, cfg.seed)?;
        let zero = NetworkGraph::noise(&shape, 0, 0.0);
        let noisy = NetworkGraph::noise(&shape, cfg.seed, common.noise_amp.max(1.0));
        let mut params = params.clone();
        params.extend(disc.params().clone());
        let objective = |t: &mut Tape, _: &ParamStore| {
            let x = t.constant(target.clone());
            let y1 = graph.forward_on(t, input.clone(), noisy.clone())?;
            let y0 = graph.forward_on(t, input.clone(), zero.clone())?;
            Ok(total_perceptual_loss(t, y1, y0, x, &disc, &cfg.loss_weights, f, &NoContextual)?.total)
        };
        let (value, _, _) = record_forward(objective, &params)?;
        // Central differences of an objective of size |L| carry roundoff near
        // ε·|L|/h, so gradients below 1e-6·|L| are judged on absolute error.
        let check = FdCheck {
            h: 1e-4,
            floor: fd.floor * value.item()?.abs().max(1.0),
            ..fd.clone()
        };
        let r = finite_diff_check(objective, &params, &check)?;
        reports.push(GradReport::new("perceptual", &r));
    }
    run.write_json("gradcheck.json", &reports)?;
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    for r in &reports {
        println!(
            "{}: max relative error {:.3e} over {} coordinates ({} skipped at kinks)",
            r.objective, r.max_rel_error, r.checked, r.skipped_kinks
        );
    }
    println!("max relative error: {worst:.3e}");
    if worst.is_nan() || worst >= GRADCHECK_TOLERANCE {
        bail!("max relative error {worst:.3e} exceeds {GRADCHECK_TOLERANCE:e}");
    }
    Ok(())
}

pub fn analyze(common: &Common, size: Option<Vec<usize>>, invocation: &Value) -> Result<()> {
    let cfg = effective_config(common)?;
    let run = require_out(common)?;
    run.record(&cfg, invocation)?;
    let m = &cfg.model;
    let shape = traced_shape(m, size)?;
    let report = count_ops(m, &shape)?;
    let cmp = compare(&report.calibrated_model(), m, &shape)?;
    let mut doubled = shape.clone();
    let r = doubled.len();
    doubled[r - 2] *= 2;
    doubled[r - 1] *= 2;
    let big = count_ops(m, &doubled)?;
    let trace = trace_shapes(m, &shape)?;
    let mut text = String::new();
    writeln!(text, "input {shape:?}")?;
    for line in report.to_lines() {
        writeln!(text, "{line}")?;
    }
    writeln!(
        text,
        "recurrence {:.0} vs counted {} (relative gap {:.2e})",
        cmp.predicted, cmp.counted, cmp.gap
    )?;
    if let Some(a) = cmp.fitted_exponent {
        writeln!(text, "per-level cost grows as n^{a:.4}")?;
    }
    writeln!(
        text,
        "doubling H and W: MACs ×{:.4}, peak activations ×{:.4}",
        big.total_macs as f64 / report.total_macs.max(1) as f64,
        big.peak_activation_bytes as f64 / report.peak_activation_bytes.max(1) as f64
    )?;
    if m.is_cube() {
        writeln!(
            text,
            "frames per level: {}; volume saving {:.1}%",
            join(&trace.level_frames, "-"),
            trace.volume_saving() * 100.0
        )?;
    }
    print!("{text}");
    run.write("analysis.txt", &text)?;
    run.write_json(
        "analysis.json",
        &json!({
            "input_shape": shape,
            "report": report,
            "comparison": cmp,
            "doubled": big,
            "level_frames": trace.level_frames,
        }),
    )?;
    Ok(())
}
