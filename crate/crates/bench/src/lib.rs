//! Deterministic inputs shared by the benchmarks.

use mgbp::Tensor;

/// A smooth pattern in `[0, 255]`; cheap to build and free of RNG state.
pub fn pattern(shape: &[usize], phase: f64) -> Tensor {
    let w = *shape.last().expect("rank >= 1");
    Tensor::from_fn(shape, |i| {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        127.5 + 100.0 * ((0.37 * x + phase).sin() * (0.23 * y + 1.7 * phase).cos())
    })
}

/// Small weights so stacked layers stay in range.
pub fn weights(shape: &[usize], seed: u64) -> Tensor {
    let fan: usize = shape[1..].iter().product();
    pattern(shape, seed as f64).map(|v| (v - 127.5) / (100.0 * fan as f64))
}
