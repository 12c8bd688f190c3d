mod common;

use common::{dense_matrix, rand_tensor, spectral_norm, vnsc_oracle};
use mgbp::graph::{ibp_classic, LinearConv};
use mgbp::perceptual::{rsgan_losses, rsgan_losses_var, vnsc, Discriminator, DiscriminatorConfig, VnscConfig};
use mgbp::autograd::Tape;
use mgbp::tensor::ConvSpec;
use mgbp::Tensor;
use proptest::prelude::*;

/// `R = I + 0.15·A` and `P = c·Rᵀ` with `c = 1/σ_max(R)²`, so `RP` is
/// symmetric with spectrum in `(0, 1]`.
fn dense_instance(seed: u64) -> (LinearConv, LinearConv) {
    let spec = ConvSpec::square(8, 8, 1, 1, 0);
    let a = rand_tensor(&[8, 8, 1, 1], seed, -1.0, 1.0);
    let r = Tensor::from_fn(&[8, 8, 1, 1], |i| a.data()[i] * 0.15 + if i / 8 == i % 8 { 1.0 } else { 0.0 });
    let rows: Vec<Vec<f64>> = (0..8).map(|i| r.data()[i * 8..i * 8 + 8].to_vec()).collect();
    let s = spectral_norm(&rows, 500);
    let c = 1.0 / (s * s);
    let p = Tensor::from_fn(&[8, 8, 1, 1], |i| c * r.data()[(i % 8) * 8 + i / 8]);
    (LinearConv::conv(spec, r), LinearConv::conv(spec, p))
}

fn contraction_norm(restrict: &LinearConv, project: &LinearConv) -> f64 {
    let (m, _) = dense_matrix(&[1, 8, 1, 1], |e| {
        let rp = restrict.apply(&project.apply(e).unwrap()).unwrap();
        e.sub(&rp).unwrap()
    });
    spectral_norm(&m, 2000)
}

#[test]
fn ibp_residuals_contract_on_dense_instances() {
    for seed in 0..5 {
        let (r, p) = dense_instance(seed);
        let q = contraction_norm(&r, &p);
        assert!(q < 1.0, "‖I − RP‖ = {q}");
        let x = rand_tensor(&[1, 8, 1, 1], 100 + seed, -5.0, 5.0);
        let (y, norms) = ibp_classic(&x, &r, &p, &Tensor::zeros(&[1, 8, 1, 1]), 200).unwrap();
        assert_eq!(norms.len(), 201);
        let below = norms.iter().position(|&n| n < 1e-6).expect("converges within 200 iterations");
        for w in norms[..=below].windows(2) {
            assert!(w[1] < w[0], "{norms:?}");
        }
        // each step shrinks the residual by at most the operator norm
        for w in norms[..=below].windows(2) {
            assert!(w[1] <= q * w[0] * (1.0 + 1e-9));
        }
        let ry = r.apply(&y).unwrap();
        assert!(ry.max_abs_diff(&x).unwrap() < 1e-6);
    }
}

#[test]
fn ibp_on_a_downscaling_image_operator() {
    // R: 2×2 box average with stride 2; P: its adjoint scaled to a right inverse
    let spec = ConvSpec::square(1, 1, 2, 2, 0);
    let r = LinearConv::conv(spec, Tensor::full(&[1, 1, 2, 2], 0.25));
    let p = LinearConv::conv_transposed(spec, Tensor::full(&[1, 1, 2, 2], 1.0));
    let x = rand_tensor(&[1, 1, 4, 4], 3, 0.0, 1.0);
    let (y, norms) = ibp_classic(&x, &r, &p, &Tensor::zeros(&[1, 1, 8, 8]), 3).unwrap();
    assert!(norms[1] < 1e-12);
    assert!(r.apply(&y).unwrap().max_abs_diff(&x).unwrap() < 1e-12);
}

#[test]
fn vnsc_matches_per_pixel_loops() {
    let cfg = VnscConfig::default();
    for seed in 0..20 {
        let img = rand_tensor(&[1, 3, 12, 12], seed, 0.0, 255.0);
        let got = vnsc(&img, &cfg).unwrap();
        let want = vnsc_oracle(&img, 7, 1.17, 3);
        assert_eq!(got.shape(), &[1, 49, 12, 12]);
        let diff = got.max_abs_diff(&want).unwrap();
        assert!(diff < 1e-8, "seed {seed}: {diff}");
    }
}

#[test]
fn vnsc_of_constant_images_is_zero() {
    for v in [0.0, 1.0, 77.5, 255.0] {
        let out = vnsc(&Tensor::full(&[2, 3, 12, 12], v), &VnscConfig::default()).unwrap();
        assert_eq!(out.shape(), &[2, 49, 12, 12]);
        assert!(out.data().iter().all(|&x| x == 0.0), "value {v}");
    }
}

#[test]
fn vnsc_centre_channel_is_squared_normalized_luminance() {
    let img = rand_tensor(&[1, 3, 12, 12], 3, 0.0, 255.0);
    let cfg = VnscConfig::default();
    let out = vnsc(&img, &cfg).unwrap();
    let c = cfg.channel_of(0, 0);
    assert_eq!(c, 24);
    assert!(out.data()[c * 144..(c + 1) * 144].iter().all(|&v| v >= 0.0));
}

#[test]
fn rsgan_equal_scores_give_ln_two() {
    for c in [-1e4, -3.0, 0.0, 0.5, 1e4] {
        let (ld, lg) = rsgan_losses(&[c, c], &[c, c]).unwrap();
        assert!((ld - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((lg - std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn rsgan_tape_and_scalar_agree() {
    let real = [0.3, -2.0, 40.0];
    let fake = [1.1, 5.0, -40.0];
    let mut t = Tape::new();
    let r = t.constant(Tensor::new(vec![3, 1, 1, 1], real.to_vec()).unwrap());
    let f = t.constant(Tensor::new(vec![3, 1, 1, 1], fake.to_vec()).unwrap());
    let (ld, lg) = rsgan_losses_var(&mut t, r, f).unwrap();
    let (sd, sg) = rsgan_losses(&real, &fake).unwrap();
    assert!((t.value(ld).data()[0] - sd).abs() < 1e-14);
    assert!((t.value(lg).data()[0] - sg).abs() < 1e-14);
}

#[test]
fn zero_head_discriminator_starts_at_ln_two() {
    let d = Discriminator::build(
        DiscriminatorConfig {
            width: 4,
            ..DiscriminatorConfig::for_factor(4)
        },
        0,
    )
    .unwrap();
    let real = d.forward(&rand_tensor(&[2, 3, 16, 16], 1, 0.0, 255.0)).unwrap();
    let fake = d.forward(&rand_tensor(&[2, 3, 16, 16], 2, 0.0, 255.0)).unwrap();
    assert!(real.iter().chain(&fake).all(|&c| c == 0.0));
    let (ld, lg) = rsgan_losses(&real, &fake).unwrap();
    assert_eq!((ld, lg), (std::f64::consts::LN_2, std::f64::consts::LN_2));
}

fn softplus_oracle(x: f64) -> f64 {
    // ln(1 + e^x) split so neither branch overflows
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

proptest! {
    #[test]
    fn rsgan_is_finite_and_matches_closed_form(
        r in prop::collection::vec(-1e4f64..1e4, 1..6),
        seed in 0u64..100,
    ) {
        let f: Vec<f64> = r.iter().enumerate().map(|(i, v)| -v * ((seed + i as u64) % 3) as f64 / 2.0).collect();
        let (ld, lg) = rsgan_losses(&r, &f).unwrap();
        prop_assert!(ld.is_finite() && lg.is_finite());
        let n = r.len() as f64;
        let ed: f64 = r.iter().zip(&f).map(|(a, b)| softplus_oracle(b - a)).sum::<f64>() / n;
        let eg: f64 = r.iter().zip(&f).map(|(a, b)| softplus_oracle(a - b)).sum::<f64>() / n;
        prop_assert!((ld - ed).abs() <= 1e-12 * ed.abs().max(1.0));
        prop_assert!((lg - eg).abs() <= 1e-12 * eg.abs().max(1.0));
        // L_D − L_G = mean(C_f − C_r) since softplus(t) − softplus(−t) = t
        let gap: f64 = r.iter().zip(&f).map(|(a, b)| b - a).sum::<f64>() / n;
        prop_assert!((ld - lg - gap).abs() <= 1e-9 * gap.abs().max(1.0));
    }
}
