#![allow(dead_code)]

use mgbp::graph::ModuleTag;
use mgbp::{NetworkGraph, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rand_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// A smooth-ish synthetic RGB image in `[0, 255]`.
pub fn test_image(h: usize, w: usize, seed: u64) -> Tensor {
    let phase = seed as f64 * 0.7;
    Tensor::from_fn(&[1, 3, h, w], |i| {
        let c = i / (h * w);
        let y = (i / w) % h;
        let x = i % w;
        let v = 128.0
            + 60.0 * ((x as f64 * 0.35 + c as f64 + phase).sin() * (y as f64 * 0.27).cos())
            + 40.0 * (((x / 8 + y / 8) % 2) as f64 - 0.5);
        v.clamp(0.0, 255.0)
    })
}

/// Zeroes every parameter of `graph`.
pub fn zero_params(graph: &mut NetworkGraph) {
    for t in graph.params_mut().values_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Sets a conv weight (layout `[out, in, kernel...]`) to copy input channel
/// `c` to output channel `c` through the kernel centre, for `c < n`.
pub fn set_center_identity(params: &mut ParamStore, tag: &ModuleTag, n: usize) {
    let w = params.get_mut(&tag.weight_key()).expect("weight present");
    let s = w.shape().to_vec();
    let cin = s[1];
    let kvol: usize = s[2..].iter().product();
    let centre = s[2..].iter().fold(0, |acc, &k| acc * k + k / 2);
    let d = w.data_mut();
    for c in 0..n {
        d[(c * cin + c) * kvol + centre] = 1.0;
    }
}

/// Identity network: analysis copies RGB into the first channels of the top
/// level, synthesis copies them back, and every other weight is zero so the
/// back-projection residuals vanish.
pub fn identity_network(mut graph: NetworkGraph) -> NetworkGraph {
    zero_params(&mut graph);
    let levels = graph.config().levels;
    let mut p = graph.params().clone();
    set_center_identity(&mut p, &ModuleTag::analysis(levels), 3);
    set_center_identity(&mut p, &ModuleTag::synthesis(levels), 3);
    graph.set_params(p).unwrap();
    graph
}

/// Brute-force Gaussian weights, independent of the library helper.
pub fn gauss(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size).map(|t| (-(t as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

fn clampi(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Per-pixel loops: BT.609 luminance, Gaussian local mean and variance with
/// replicate borders, normalization, then the 49 shift products.
pub fn vnsc_oracle(rgb: &Tensor, size: usize, sigma: f64, range: usize) -> Tensor {
    let s = rgb.shape();
    let (h, w) = (s[2], s[3]);
    let d = rgb.data();
    let lum: Vec<f64> = (0..h * w)
        .map(|i| 0.299 * d[i] + 0.587 * d[h * w + i] + 0.114 * d[2 * h * w + i])
        .collect();
    let g = gauss(size, sigma);
    let r = (size / 2) as isize;
    let mut vn = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (mut m, mut m2) = (0.0, 0.0);
            for a in 0..size {
                for b in 0..size {
                    let ii = clampi(i as isize + a as isize - r, h);
                    let jj = clampi(j as isize + b as isize - r, w);
                    let v = lum[ii * w + jj];
                    m += g[a] * g[b] * v;
                    m2 += g[a] * g[b] * v * v;
                }
            }
            let var = (m2 - m * m).max(0.0);
            vn[i * w + j] = (lum[i * w + j] - m) / (var.sqrt() + 1.0);
        }
    }
    let rr = range as isize;
    let side = 2 * range + 1;
    let mut out = Tensor::zeros(&[1, side * side, h, w]);
    let o = out.data_mut();
    for p in -rr..=rr {
        for q in -rr..=rr {
            let c = ((p + rr) as usize) * side + (q + rr) as usize;
            for i in 0..h {
                for j in 0..w {
                    let ii = clampi(i as isize + p, h);
                    let jj = clampi(j as isize + q, w);
                    o[(c * h + i) * w + j] = vn[i * w + j] * vn[ii * w + jj];
                }
            }
        }
    }
    out
}

/// Dense matrix of a linear map on flattened tensors of `in_shape`.
pub fn dense_matrix(in_shape: &[usize], f: impl Fn(&Tensor) -> Tensor) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n: usize = in_shape.iter().product();
    let mut cols = Vec::with_capacity(n);
    let mut out_shape = Vec::new();
    for i in 0..n {
        let mut e = Tensor::zeros(in_shape);
        e.data_mut()[i] = 1.0;
        let y = f(&e);
        out_shape = y.shape().to_vec();
        cols.push(y.into_data());
    }
    let m = cols[0].len();
    let rows = (0..m).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
    (rows, out_shape)
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm(a: &[Vec<f64>], iters: usize) -> f64 {
    let n = a[0].len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin() * 0.5).collect();
    let mut est = 0.0;
    for _ in 0..iters {
        let av: Vec<f64> = a.iter().map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let mut atav = vec![0.0; n];
        for (row, &s) in a.iter().zip(&av) {
            for (t, &x) in atav.iter_mut().zip(row) {
                *t += x * s;
            }
        }
        let norm = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm.sqrt();
        v = atav.iter().map(|x| x / norm).collect();
    }
    est
}
