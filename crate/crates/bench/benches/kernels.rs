use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mgbp::graph::trace_shapes;
use mgbp::perceptual::{vnsc, VnscConfig};
use mgbp::tensor::{bicubic_resize, conv, conv_transposed, ConvSpec, Direction};
use mgbp::tiling::{plan_tiles, tiled_infer, TileSettings};
use mgbp::{MgbpConfig, NetworkGraph, Tensor};
use mgbp_bench::{pattern, weights};

fn kernels(c: &mut Criterion) {
    let x = pattern(&[1, 32, 48, 48], 0.1);
    let down = ConvSpec::square(32, 32, 4, 2, 1);
    let w = weights(&[32, 32, 4, 4], 1);
    let b = Tensor::zeros(&[32]);
    c.bench_function("conv 32→32 k4 s2 48×48", |bn| {
        bn.iter(|| conv(black_box(&x), &w, &b, &down).unwrap())
    });
    let small = pattern(&[1, 32, 24, 24], 0.2);
    c.bench_function("conv_transposed 32→32 k4 s2 24×24", |bn| {
        bn.iter(|| conv_transposed(black_box(&small), &w, &b, &down).unwrap())
    });
    let img = pattern(&[1, 3, 96, 96], 0.3);
    c.bench_function("bicubic ×4 down+up 96×96", |bn| {
        bn.iter(|| {
            let lr = bicubic_resize(black_box(&img), 4, Direction::Down).unwrap();
            bicubic_resize(&lr, 4, Direction::Up).unwrap()
        })
    });
    let cfg = VnscConfig::default();
    c.bench_function("vnsc 96×96", |bn| bn.iter(|| vnsc(black_box(&img), &cfg).unwrap()));
}

fn network(c: &mut Criterion) {
    let cfg = MgbpConfig::toy(3, 2, 16);
    let g = NetworkGraph::build(cfg.clone(), 0).unwrap();
    let x = pattern(&[1, 3, 64, 64], 0.4);
    c.bench_function("toy L=3 μ=2 forward 64×64", |bn| {
        bn.iter(|| g.forward(black_box(&x), 0, 0.0).unwrap())
    });
    let mut s = TileSettings::new([1, 32, 32]);
    s.align = cfg.level_scale(1);
    let plan = plan_tiles(x.shape(), &s).unwrap();
    c.bench_function("toy L=3 μ=2 tiled 64×64 tile 32", |bn| {
        bn.iter(|| tiled_infer(&g, black_box(&x), &plan, 0.0, 0, 1).unwrap())
    });
    let preset = MgbpConfig::preset_v2(8).unwrap();
    c.bench_function("trace v2 ×8 192×192", |bn| {
        bn.iter(|| trace_shapes(black_box(&preset), &[1, 3, 192, 192]).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels, network
}
criterion_main!(benches);
