use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mgbp::graph::read_params;
use serde_json::Value;

const TOY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/toy.json");

fn mgbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgbp"))
        .args(args)
        .env_remove("MGBP_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn failure(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure");
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_png(path: &Path, w: u32, h: u32, phase: f64) {
    let mut data = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let v = 128.0 + 90.0 * ((x as f64 * 0.4 + c as f64 + phase).sin() * (y as f64 * 0.3).cos());
                data.push(v.round() as u8);
            }
        }
    }
    let mut enc = png::Encoder::new(fs::File::create(path).unwrap(), w, h);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header().unwrap().write_image_data(&data).unwrap();
}

fn toy_with(f: impl FnOnce(&mut Value)) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(TOY).unwrap()).unwrap();
    f(&mut v);
    v
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn files_under(root: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p);
            }
        }
    }
    out
}

#[test]
fn gradcheck_on_toy_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&mgbp(&["gradcheck", "--config", TOY, "--out", s(&dir.path().join("run"))]));
    let line = out.lines().find(|l| l.starts_with("max relative error:")).unwrap();
    let err: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-4, "{line}");
    assert!(dir.path().join("run/gradcheck.json").exists());
}

#[test]
fn zero_noise_inference_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.png");
    write_png(&img, 20, 14, 0.0);
    let run = |name: &str, seed: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_mgbp"))
            .args(["infer", s(&img), "--config", TOY, "--seed", seed, "--out", s(&out)])
            .args(["--tile", "1,16,16"])
            .env("MGBP_THREADS", threads)
            .output()
            .unwrap();
        ok(&o);
        fs::read(out.join("outputs/in.png")).unwrap()
    };
    let a = run("a", "3", "1");
    assert_eq!(a, run("b", "3", "1"));
    assert_eq!(a, run("c", "3", "4"));
    let decoded = png::Decoder::new(std::io::Cursor::new(&a)).read_info().unwrap();
    assert_eq!((decoded.info().width, decoded.info().height), (80, 56));
}

#[test]
fn noisy_inference_depends_on_seed_only() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.png");
    write_png(&img, 16, 16, 1.0);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&mgbp(&["infer", s(&img), "--config", TOY, "--noise-amp", "1", "--seed", seed, "--out", s(&out)]));
        fs::read(out.join("outputs/in.png")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "1"));
}

#[test]
fn sweep_emits_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("hr.png");
    write_png(&img, 24, 24, 0.5);
    let out = dir.path().join("run");
    let stdout = ok(&mgbp(&["sweep", s(&img), "--config", TOY, "--out", s(&out)]));
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let amps: Vec<f64> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(amps, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    assert_eq!(stdout.lines().count(), 7);
}

#[test]
fn describe_factor_eight_preset() {
    let out = ok(&mgbp(&["describe", "--preset", "v2-x8"]));
    assert!(out.contains("5 levels"), "{out}");
    assert!(out.contains("channels (lowest to highest resolution): 192-128-64-32-16"));
}

#[test]
fn describe_single_level_has_two_modules() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_with(|v| {
        v["model"]["levels"] = 1.into();
        v["model"]["channels_per_level"] = serde_json::json!([8]);
    });
    let p = write_config(dir.path(), "l1.json", &cfg);
    let out = ok(&mgbp(&["describe", "--config", s(&p)]));
    assert!(out.contains("modules: 2 (analysis 1, synthesis 1)"), "{out}");
    assert!(out.contains("analysis.k1") && out.contains("synthesis.k1"));
}

#[test]
fn train_outputs_match_description_and_rerun_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    write_png(&dir.path().join("a.png"), 40, 40, 0.0);
    write_png(&dir.path().join("b.png"), 36, 44, 2.0);
    let cfg = toy_with(|v| {
        v["paths"] = serde_json::json!({ "train_images": ["a.png", "b.png"] });
        v["train"]["max_steps"] = 12.into();
        v["train"]["validate_every"] = 4.into();
    });
    let p = write_config(dir.path(), "run.json", &cfg);
    let run1 = dir.path().join("run1");
    ok(&mgbp(&["train", "--config", s(&p), "--out", s(&run1)]));
    let log = fs::read_to_string(run1.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 12);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["lr"], 1e-3);
    assert_eq!(first["terms"][0][0], "fidelity");

    let desc = ok(&mgbp(&["describe", "--config", s(&p)]));
    let count: usize = desc
        .lines()
        .find_map(|l| l.strip_prefix("parameters: "))
        .unwrap()
        .parse()
        .unwrap();
    let (_, params) = read_params(&mut fs::File::open(run1.join("best.ckpt")).unwrap()).unwrap();
    assert_eq!(params.values().map(|t| t.len()).sum::<usize>(), count);

    // the effective config alone reproduces the run
    let run2 = dir.path().join("run2");
    ok(&mgbp(&["train", "--config", s(&run1.join("config.json")), "--out", s(&run2)]));
    for f in ["best.ckpt", "last.ckpt", "train_log.jsonl"] {
        assert_eq!(fs::read(run1.join(f)).unwrap(), fs::read(run2.join(f)).unwrap(), "{f}");
    }

    let inf = dir.path().join("inf");
    let a = dir.path().join("a.png");
    let weights = run1.join("best.ckpt");
    let out = ok(&mgbp(&[
        "infer", s(&a), "--degrade", "--config", s(&p), "--weights", s(&weights), "--out", s(&inf),
    ]));
    assert!(out.contains("a.png:mgbp: psnr_y="));
    assert_eq!(fs::read_to_string(inf.join("metrics.jsonl")).unwrap().lines().count(), 2);
    let err = failure(&mgbp(&["infer", s(&a), "--preset", "v2-x4", "--weights", s(&weights), "--out", s(&inf)]));
    assert!(err.contains("different configuration"), "{err}");
}

#[test]
fn commands_write_only_inside_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("inputs");
    fs::create_dir(&inputs).unwrap();
    let img = inputs.join("x.png");
    write_png(&img, 16, 16, 0.0);
    let cfg = write_config(&inputs, "toy.json", &toy_with(|_| {}));
    let before = files_under(dir.path());
    let run = dir.path().join("run");
    ok(&mgbp(&["infer", s(&img), "--config", s(&cfg), "--out", s(&run)]));
    ok(&mgbp(&["sweep", s(&img), "--config", s(&cfg), "--out", s(&run)]));
    ok(&mgbp(&["dfv", s(&img), "--pixel", "5,7", "--config", s(&cfg), "--out", s(&run)]));
    ok(&mgbp(&["analyze", "--config", s(&cfg), "--out", s(&run)]));
    ok(&mgbp(&["describe", "--config", s(&cfg), "--out", s(&run)]));
    let after = files_under(dir.path());
    for p in after.difference(&before) {
        assert!(p.starts_with(&run), "{} written outside the run directory", p.display());
    }
    for name in ["config.json", "invocation.json", "outputs/x.png", "sweep.csv", "dfv.csv", "dfv/y5_x7.png"] {
        assert!(run.join(name).exists(), "{name}");
    }
    assert!(run.join("dfv/y5_x7_c2.mgbt").exists());
    let eff: Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(eff["train"]["patch_size"], 32);
    assert_eq!(eff["discriminator"]["scales"], 3);
}

#[test]
fn video_inference_keeps_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for t in 0..6 {
        write_png(&frames.join(format!("f{t:02}.png")), 8, 6, t as f64 * 0.3);
    }
    let cfg = toy_with(|v| {
        v["model"]["dims"] = "3d".into();
        v["model"]["temporal_kernels"] = serde_json::json!([3]);
    });
    let p = write_config(dir.path(), "video.json", &cfg);
    let run = dir.path().join("run");
    ok(&mgbp(&[
        "infer-video", s(&frames), "--config", s(&p), "--tile", "4,16,16", "--stride-frames", "2", "--out", s(&run),
    ]));
    let written: Vec<_> = fs::read_dir(run.join("frames")).unwrap().collect();
    assert_eq!(written.len(), 6);
    let eff: Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(eff["tiling"]["temporal_stride"], 2);
    assert_eq!(eff["tiling"]["tile"], serde_json::json!([4, 16, 16]));
}

#[test]
fn analyze_video_preset_reports_frame_saving() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&mgbp(&["analyze", "--preset", "3d-x16", "--size", "37,32,32", "--out", s(dir.path())]));
    assert!(out.contains("frames per level: 29-31-33-35-37-37; volume saving 21.6%"), "{out}");
    assert!(out.contains("MACs ×4.0000, peak activations ×4.0000"));
}

#[test]
fn bad_inputs_give_one_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.png");
    fs::write(&bad, b"not a png").unwrap();
    let run = dir.path().join("run");
    let err = failure(&mgbp(&["infer", s(&bad), "--config", TOY, "--out", s(&run)]));
    assert!(err.contains("malformed PNG"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let cfg = toy_with(|v| v["model"]["colour"] = 1.into());
    let p = write_config(dir.path(), "unknown.json", &cfg);
    let err = failure(&mgbp(&["describe", "--config", s(&p)]));
    assert!(err.contains("colour"), "{err}");

    let err = failure(&mgbp(&["describe"]));
    assert!(err.contains("--config"), "{err}");
    let err = failure(&mgbp(&["infer", s(&bad), "--config", TOY]));
    assert!(err.contains("--out"), "{err}");
    let err = failure(&mgbp(&["describe", "--config", s(&dir.path().join("missing.json"))]));
    assert!(err.contains("missing.json"), "{err}");

    let o = Command::new(env!("CARGO_BIN_EXE_mgbp"))
        .args(["gradcheck", "--config", TOY, "--out", s(&run)])
        .env("MGBP_THREADS", "0")
        .output()
        .unwrap();
    assert!(failure(&o).contains("MGBP_THREADS"));
}
