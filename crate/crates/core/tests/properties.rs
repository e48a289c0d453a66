use iscc_core::algorithms::{construct_beam, golden_minimize, lemma2_eigen_check, required_offload_sinr};
use iscc_core::linalg::{hermitian_eigen, outer, quad_form};
use iscc_core::mcval::{ls_estimate_trm, simulate_echo};
use iscc_core::metrics::{beampattern, crb_extended, crb_point, schur_t_max};
use iscc_core::rng::{self, streams};
use iscc_core::scenario::{
    generate_channels, generate_channels_with, steering_derivative, steering_vector, target_response_extended,
    target_response_point, ChannelModel, SteeringBundle, SystemConfig,
};
use iscc_core::{CMat, CVec, C64};
use proptest::prelude::*;

fn psd(seed: u64, m: usize, rank: usize) -> CMat {
    let mut r = rng::stream(seed, streams::TEST);
    let a = rng::complex_normal_mat(&mut r, m, rank, 1.0);
    &a * a.adjoint()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivative_matches_central_difference(theta in -1.4f64..1.4, n in 1usize..12, delta in 0.1f64..1.0) {
        let h = 1e-6;
        let up = steering_vector(theta + h, n, delta).unwrap();
        let down = steering_vector(theta - h, n, delta).unwrap();
        let fd = (up - down) / C64::new(2.0 * h, 0.0);
        let d = steering_derivative(theta, n, delta).unwrap();
        let scale = d.norm().max(1.0);
        prop_assert!((fd - &d).norm() / scale <= 1e-6);
    }

    #[test]
    fn steering_norm_is_element_count(theta in -3.2f64..3.2, n in 1usize..20, delta in 0.05f64..2.0) {
        let a = steering_vector(theta, n, delta).unwrap();
        prop_assert!((a.norm_squared() - n as f64).abs() < 1e-12 * n as f64);
    }

    #[test]
    fn point_crb_is_homogeneous(seed in 0u64..1000, c in 0.01f64..100.0, theta in -1.0f64..1.0) {
        let b = SteeringBundle::new(theta, 4, 5, 0.5).unwrap();
        let r = psd(seed, 4, 4);
        let alpha = C64::new(0.3, -0.2);
        let base = crb_point(&r, &b, alpha, 32, 1e-2).unwrap();
        let scaled = crb_point(&(&r * C64::new(c, 0.0)), &b, alpha, 32, 1e-2).unwrap();
        prop_assert!(rel(scaled * c, base) < 1e-9);
    }

    #[test]
    fn schur_tightness(seed in 0u64..1000, theta in -1.0f64..1.0) {
        let b = SteeringBundle::new(theta, 4, 4, 0.5).unwrap();
        let r = psd(seed, 4, 3);
        let alpha = C64::new(0.7, 0.1);
        let (t_len, sigma) = (16usize, 0.5);
        let crb = crb_point(&r, &b, alpha, t_len, sigma).unwrap();
        let t = schur_t_max(&r, &b);
        let implied = sigma / (2.0 * alpha.norm_sqr() * t_len as f64 * t);
        prop_assert!(rel(implied, crb) < 1e-9);
    }

    #[test]
    fn extended_crb_is_homogeneous(seed in 0u64..1000, c in 0.01f64..100.0) {
        let r = psd(seed, 4, 4);
        let base = crb_extended(&r, 3, 64, 1.0).unwrap();
        let scaled = crb_extended(&(&r * C64::new(c, 0.0)), 3, 64, 1.0).unwrap();
        prop_assert!(rel(scaled * c, base) < 1e-9);
    }

    #[test]
    fn beampattern_is_nonnegative_and_bounded(seed in 0u64..1000) {
        let r = psd(seed, 6, 2);
        let grid: Vec<f64> = (-90..=90).map(|d| (d as f64).to_radians()).collect();
        let lmax = hermitian_eigen(&r).values[0];
        for (_, g) in beampattern(&r, &grid, 0.5).unwrap() {
            prop_assert!(g >= -1e-12 && g <= 6.0 * lmax * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constructed_beam_dominated(seed in 0u64..1000, rank in 1usize..5) {
        let w = psd(seed, 5, rank);
        let mut r = rng::stream(seed ^ 0xabc, streams::TEST);
        let h = rng::complex_normal_vec(&mut r, 5, 1.0);
        let v = construct_beam(&w, &h);
        prop_assert!(rel(h.dotc(&v).norm_sqr(), quad_form(&w, &h)) < 1e-9);
        let rest = hermitian_eigen(&(&w - outer(&v)));
        prop_assert!(*rest.values.last().unwrap() >= -1e-9 * rest.values[0].abs().max(1.0));
    }

    #[test]
    fn eigen_criterion_on_rotations(seed in 0u64..1000, scale in 0.1f64..10.0) {
        let mut r = rng::stream(seed, streams::TEST);
        let x = rng::complex_normal_vec(&mut r, 4, 1.0);
        let y = CVec::from_fn(4, |i, _| if i == 0 { -x[1].conj() } else if i == 1 { x[0].conj() } else { C64::new(0.0, 0.0) });
        let x2 = CVec::from_fn(4, |i, _| if i < 2 { x[i] } else { C64::new(0.0, 0.0) });
        prop_assert!(lemma2_eigen_check(&x2, &y).unwrap());
        let y_scaled = &y * C64::new(1.0 + scale, 0.0);
        prop_assert!(!lemma2_eigen_check(&x2, &y_scaled).unwrap());
    }

    #[test]
    fn offload_target_falls_with_cpu(f1 in 0.0f64..2e9, df in 1.0f64..1e9) {
        let cfg = SystemConfig::default();
        prop_assert!(required_offload_sinr(&cfg, f1 + df) < required_offload_sinr(&cfg, f1));
    }

    #[test]
    fn noiseless_ls_recovers_response(seed in 0u64..1000) {
        let mut r = rng::stream(seed, streams::TEST);
        let g = rng::complex_normal_mat(&mut r, 3, 4, 1.0);
        let s = rng::complex_normal_mat(&mut r, 4, 16, 1.0);
        let y = simulate_echo(&g, &s, 0.0, seed).unwrap();
        let est = ls_estimate_trm(&y, &s).unwrap();
        prop_assert!((est - g).norm() < 1e-10);
    }

    #[test]
    fn golden_finds_parabola_vertex(c in -5.0f64..5.0) {
        let m = golden_minimize(-10.0, 10.0, 1e-9, 5, None, |x| Ok(((x - c).powi(2), ()))).unwrap();
        prop_assert!((m.x - c).abs() < 1e-6);
    }

    #[test]
    fn extended_response_is_linear(c_re in -3.0f64..3.0, c_im in -3.0f64..3.0, t1 in -1.2f64..1.2, t2 in -1.2f64..1.2) {
        let cfg = SystemConfig::default();
        let c = C64::new(c_re, c_im);
        let sc = [(C64::new(0.5, 0.1), t1), (C64::new(-0.2, 0.4), t2)];
        let scaled: Vec<_> = sc.iter().map(|&(a, t)| (a * c, t)).collect();
        let g = target_response_extended(&sc, &cfg).unwrap();
        let gs = target_response_extended(&scaled, &cfg).unwrap();
        prop_assert!((gs - g * c).norm() < 1e-12 * (1.0 + c.norm()));
    }
}

#[test]
fn channel_power_matches_path_loss() {
    let cfg = SystemConfig::default();
    let los = generate_channels_with(&cfg, 0, ChannelModel::LosOnly).unwrap();
    let expected = los.h[los.server()].norm_squared();
    let n = 100_000u64;
    let mean = (0..n)
        .map(|s| {
            let ch = generate_channels(&cfg, s).unwrap();
            ch.h[ch.server()].norm_squared()
        })
        .sum::<f64>()
        / n as f64;
    assert!(rel(mean, expected) < 0.01, "{mean} vs {expected}");
}

#[test]
fn point_response_singular_values() {
    let cfg = SystemConfig::default();
    let mut r = rng::stream(5, streams::TEST);
    for _ in 0..20 {
        let theta = (rng::uniform(&mut r) - 0.5) * 3.0;
        let alpha = rng::complex_normal(&mut r, 1.0);
        let b = SteeringBundle::new(theta, cfg.m_tx, cfg.m_rx, cfg.element_spacing).unwrap();
        let g = target_response_point(&b, alpha);
        let sv = g.svd(false, false).singular_values;
        let top = b.a.norm() * b.b.norm() * alpha.norm();
        let mut sorted: Vec<f64> = sv.iter().copied().collect();
        sorted.sort_by(|x, y| y.total_cmp(x));
        assert!(rel(sorted[0], top) < 1e-12);
        assert!(sorted[1..].iter().all(|&s| s < 1e-10 * top));
    }
}

#[test]
fn three_scatterers_give_rank_three() {
    let cfg = SystemConfig::default();
    let one = C64::new(1.0, 0.0);
    let g = target_response_extended(&[(one, -0.6), (one, 0.1), (one, 0.9)], &cfg).unwrap();
    let sv = g.svd(false, false).singular_values;
    let top = sv.max();
    assert_eq!(sv.iter().filter(|&&s| s > 1e-9 * top).count(), 3);
}
