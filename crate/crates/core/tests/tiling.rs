mod common;

use common::{identity_network, rand_tensor, test_image};
use mgbp::graph::Dims;
use mgbp::tiling::{
    dfv_difference_quotient, dfv_impulse_response, plan_tiles, sweep_noise, tiled_infer, Linearization, TileSettings,
};
use mgbp::{MgbpConfig, NetworkGraph, Tensor};
use proptest::prelude::*;

fn settings(tile: [usize; 3], stride: [usize; 2], guard: usize, align: usize) -> TileSettings {
    TileSettings {
        spatial_stride: Some(stride),
        guard: [0, guard, guard],
        align,
        ..TileSettings::new(tile)
    }
}

#[test]
fn identity_network_tiles_exactly() {
    let g = identity_network(NetworkGraph::build(MgbpConfig::toy(2, 2, 4), 1).unwrap());
    let x = rand_tensor(&[1, 3, 40, 56], 2, 0.0, 255.0);
    let direct = g.forward(&x, 0, 0.0).unwrap();
    assert_eq!(direct, x);
    let plan = plan_tiles(x.shape(), &settings([1, 16, 16], [6, 10], 0, 2)).unwrap();
    assert!(plan.tile_count() > 4);
    let tiled = tiled_infer(&g, &x, &plan, 0.0, 0, 2).unwrap();
    assert!(tiled.max_abs_diff(&direct).unwrap() < 1e-10);
}

#[test]
fn identity_video_network_tiles_exactly() {
    let mut cfg = MgbpConfig::toy(2, 1, 4);
    cfg.dims = Dims::D3;
    cfg.temporal_kernels = vec![3];
    let g = identity_network(NetworkGraph::build(cfg, 1).unwrap());
    let x = rand_tensor(&[1, 3, 12, 16, 16], 3, 0.0, 255.0);
    let direct = g.forward(&x, 0, 0.0).unwrap();
    assert!(direct.max_abs_diff(&x).unwrap() < 1e-12);
    let mut s = settings([5, 8, 8], [4, 4], 0, 2);
    s.temporal_stride = 2;
    let plan = plan_tiles(x.shape(), &s).unwrap();
    let tiled = tiled_infer(&g, &x, &plan, 0.0, 0, 1).unwrap();
    assert!(tiled.max_abs_diff(&direct).unwrap() < 1e-10);
}

#[test]
fn linear_network_agrees_when_guard_covers_receptive_field() {
    // one level: two 3×3 convs, no relu, receptive radius 2
    let g = NetworkGraph::build(MgbpConfig::toy(1, 1, 6), 4).unwrap();
    let mut p = g.params().clone();
    for (k, t) in p.iter_mut() {
        if k.ends_with(".bias") {
            *t = rand_tensor(t.shape(), 5, -3.0, 3.0);
        }
    }
    let mut g = g;
    g.set_params(p).unwrap();
    let x = rand_tensor(&[1, 3, 36, 44], 6, 0.0, 255.0);
    let direct = g.forward(&x, 0, 0.0).unwrap();
    let plan = plan_tiles(x.shape(), &settings([1, 16, 16], [8, 8], 2, 1)).unwrap();
    let tiled = tiled_infer(&g, &x, &plan, 0.0, 0, 3).unwrap();
    let scale = direct.max_abs();
    let inner = |t: &Tensor| t.crop(&[0, 0, 4, 4], &[1, 3, 28, 36]).unwrap();
    assert!(inner(&tiled).max_abs_diff(&inner(&direct)).unwrap() < 1e-6 * scale.max(1.0));
    assert!(tiled.max_abs_diff(&direct).unwrap() < 1e-9 * scale.max(1.0));

    // without a guard band the seams show
    let plan = plan_tiles(x.shape(), &settings([1, 16, 16], [8, 8], 0, 1)).unwrap();
    let seams = tiled_infer(&g, &x, &plan, 0.0, 0, 1).unwrap();
    assert!(seams.max_abs_diff(&direct).unwrap() > 1e-6);
}

#[test]
fn zero_amplitude_is_seed_and_thread_independent() {
    let g = NetworkGraph::build(MgbpConfig::toy(2, 2, 4), 7).unwrap();
    let x = rand_tensor(&[1, 3, 24, 32], 8, 0.0, 255.0);
    let plan = plan_tiles(x.shape(), &settings([1, 16, 16], [8, 8], 0, 2)).unwrap();
    let a = tiled_infer(&g, &x, &plan, 0.0, 1, 1).unwrap();
    let b = tiled_infer(&g, &x, &plan, 0.0, 99, 4).unwrap();
    assert_eq!(a.data(), b.data());
    let n1 = tiled_infer(&g, &x, &plan, 1.0, 1, 1).unwrap();
    let n2 = tiled_infer(&g, &x, &plan, 1.0, 2, 1).unwrap();
    assert_ne!(n1.data(), n2.data());
    assert_eq!(n1.data(), tiled_infer(&g, &x, &plan, 1.0, 1, 3).unwrap().data());
}

#[test]
fn plan_rejects_mismatched_input() {
    let g = NetworkGraph::build(MgbpConfig::toy(1, 1, 2), 0).unwrap();
    let plan = plan_tiles(&[1, 3, 16, 16], &TileSettings::new([1, 8, 8])).unwrap();
    assert!(tiled_infer(&g, &Tensor::zeros(&[1, 3, 16, 24]), &plan, 0.0, 0, 1).is_err());
}

proptest! {
    #[test]
    fn normalized_weights_partition_unity(
        h in 8usize..60, w in 8usize..60, th in 4usize..16, tw in 4usize..16, guard in 0usize..2
    ) {
        let (th, tw) = (th.min(h), tw.min(w));
        let s = TileSettings {
            spatial_stride: Some([(th / 2).max(1), (tw / 2).max(1)]),
            guard: [0, guard, guard],
            ..TileSettings::new([1, th, tw])
        };
        let Ok(plan) = plan_tiles(&[1, 3, h, w], &s) else { return Ok(()) };
        let [_, ay, ax] = plan.accumulated_weight();
        prop_assert!(ay.iter().chain(&ax).all(|&v| v > 0.0));
        for a in 1..3 {
            let mut total = vec![0.0; plan.extent[a]];
            for &o in &plan.axis_origins[a] {
                let mut origin = [0; 3];
                origin[a] = o;
                let win = plan.window(origin);
                for (j, v) in win.axis(a).iter().enumerate() {
                    prop_assert!(*v >= 0.0 && *v <= 1.0);
                    total[o + j] += v;
                }
            }
            let cov = plan.axis_coverage(a);
            for (t, c) in total.iter().zip(&cov) {
                prop_assert!((t / c - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn temporal_plan_uses_five_frame_separation() {
    let plan = plan_tiles(&[1, 3, 100, 8, 8], &TileSettings::new([37, 8, 8])).unwrap();
    let mut expected: Vec<usize> = (0..=60).step_by(5).collect();
    expected.push(63);
    assert_eq!(plan.axis_origins[0], expected);
}

fn dfv_model() -> (NetworkGraph, Tensor) {
    let g = NetworkGraph::build(MgbpConfig::toy(3, 2, 4), 11).unwrap();
    (g, test_image(16, 16, 3))
}

fn rel(a: &Tensor, b: &Tensor) -> f64 {
    a.sub(b).unwrap().norm() / a.norm().max(b.norm()).max(1e-300)
}

#[test]
fn dfv_is_independent_of_impulse_amplitude() {
    let (g, x) = dfv_model();
    let base = dfv_impulse_response(&g, &x, &[0, 1, 7, 9], 1.0).unwrap();
    assert!(base.norm() > 0.0);
    for delta in [1e-3, 0.5, 17.0, 1e4, -2.0] {
        let r = dfv_impulse_response(&g, &x, &[0, 1, 7, 9], delta).unwrap();
        assert!(rel(&r, &base) < 1e-9, "delta {delta}");
    }
    let q = dfv_difference_quotient(&g, &x, &[0, 1, 7, 9], 1.0).unwrap();
    assert!(rel(&q, &base) < 1e-9);
}

#[test]
fn frozen_network_superposes() {
    let (g, x) = dfv_model();
    let mut lin = Linearization::at(&g, &x).unwrap();
    let a = rand_tensor(x.shape(), 1, -1.0, 1.0);
    let b = rand_tensor(x.shape(), 2, -1.0, 1.0);
    let la = lin.linear(&a).unwrap();
    let lb = lin.linear(&b).unwrap();
    let combo = a.scale(2.5).add(&b.scale(-0.75)).unwrap();
    let lc = lin.linear(&combo).unwrap();
    let expected = la.scale(2.5).add(&lb.scale(-0.75)).unwrap();
    assert!(rel(&lc, &expected) < 1e-9);
    // at the linearization point the frozen network is the network
    let y = g.forward(&x, 0, 0.0).unwrap();
    assert!(rel(&lin.affine(&x).unwrap(), &y) < 1e-12);
}

#[test]
fn noise_sweep_has_one_row_per_amplitude() {
    let g = NetworkGraph::build(MgbpConfig::toy(2, 1, 4), 0).unwrap();
    let x = test_image(16, 16, 1);
    let amps = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let rows = sweep_noise(&g, &x, &x, &amps, 5, 2).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().zip(amps).all(|(r, a)| r.amplitude == a));
    assert!(sweep_noise(&g, &x, &x, &[-1.0], 5, 2).is_err());
}
