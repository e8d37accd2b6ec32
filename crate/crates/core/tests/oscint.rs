//! Window-integral bound sweeps and Taylor-identity residuals.

use biharm::kernels::{profile, ProfileKind};
use biharm::oscint::{
    k_n_integral, n0_index, taylor_identity_check, verify_lemma31, window, OscSpec,
};
use biharm::specfun::{Sign, SpecFunConfig};
use num_complex::Complex64;
use proptest::prelude::*;

const ONE: fn(f64) -> Complex64 = |_s| Complex64::new(1.0, 0.0);

#[test]
fn partition_of_unity_over_twelve_decades() {
    // Σ_N φ₀(2^{−N}s) = 1 for s ∈ [1e−6, 1e6]
    for k in 0..=240 {
        let s = 1e-6f64 * 10f64.powf(k as f64 / 20.0);
        let total: f64 = (-60..=60).map(|n| window(n, s)).sum();
        assert!((total - 1.0).abs() < 1e-12, "s={s:e}: sum={total}");
    }
}

#[test]
fn window_support_and_transition_band() {
    for n in [-3i32, 0, 4] {
        let scale = (n as f64).exp2();
        // zero outside [2^{N−2}, 2^N]
        assert_eq!(window(n, scale * 0.2), 0.0);
        assert_eq!(window(n, scale * 1.05), 0.0);
        // transition-band value strictly inside (0, 1)
        let v = window(n, scale * 0.6);
        assert!(v > 0.0 && v < 1.0, "N={n}: {v}");
        // at s = 2^N/2 the outer bump is exactly 1 and the inner exactly 0
        assert_eq!(window(n, scale * 0.5), 1.0);
    }
}

#[test]
fn unoscillatory_integral_is_n_independent() {
    // t = 0, Φ = 0, Ψ ≡ 1: K_N = ∫φ₀(s)ds regardless of N
    let base = k_n_integral(&OscSpec::new(0.0, 0, 0.0, Sign::Plus, &ONE)).unwrap();
    assert!(base.re > 0.3 && base.re < 0.8 && base.im == 0.0);
    for n in [-7i32, -1, 6] {
        let k = k_n_integral(&OscSpec::new(0.0, n, 0.0, Sign::Plus, &ONE)).unwrap();
        assert!((k - base).norm() < 1e-13);
    }
}

#[test]
fn quadrature_self_consistency_under_refinement() {
    for (t, n, phi) in [(3.0, 1, 40.0), (120.0, -2, 7.0), (9.0, 0, 0.0), (0.4, 2, 300.0)] {
        let mut spec = OscSpec::new(t, n, phi, Sign::Minus, &ONE);
        let coarse = k_n_integral(&spec).unwrap();
        spec.min_panels = 200;
        let fine = k_n_integral(&spec).unwrap();
        assert!(
            (coarse - fine).norm() < 1e-8,
            "(t,N,Φ)=({t},{n},{phi}): Δ={:.3e}",
            (coarse - fine).norm()
        );
    }
}

fn sweep_grids(double: bool) -> (Vec<f64>, Vec<i32>, Vec<f64>) {
    let mut t: Vec<f64> = vec![1.0, 4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0, 10_000.0];
    let mut phi: Vec<f64> = vec![0.0, 0.5, 2.0, 8.0, 32.0, 128.0, 512.0, 1000.0];
    if double {
        t.extend_from_slice(&[2.0, 8.0, 32.0, 128.0, 512.0, 2048.0, 7000.0]);
        phi.extend_from_slice(&[0.25, 1.0, 4.0, 16.0, 64.0, 256.0, 750.0]);
    }
    (t, (-10..=5).collect(), phi)
}

#[test]
fn lemma_bound_sweep_is_stable() {
    let (t, n, phi) = sweep_grids(false);
    let base = verify_lemma31(&t, &n, &phi, &ONE);
    assert!(base.sup_inside.is_finite() && base.sup_outside.is_finite());
    assert!(base.sup_inside > 0.0 && base.sup_outside > 0.0);
    // the −1/2 envelope is genuinely attained inside the stationary window
    assert!(base.sup_inside > 0.05, "inside envelope slack: {}", base.sup_inside);
    assert!(base.max_window_offset <= 3, "window offset {}", base.max_window_offset);

    let (t2, n2, phi2) = sweep_grids(true);
    let big = verify_lemma31(&t2, &n2, &phi2, &ONE);
    assert!(big.sup_inside <= base.sup_inside * 1.05, "{} vs {}", big.sup_inside, base.sup_inside);
    assert!(
        big.sup_outside <= base.sup_outside * 1.05,
        "{} vs {}",
        big.sup_outside,
        base.sup_outside
    );
}

#[test]
fn phi_zero_branch_has_full_strength_decay() {
    // Φ = 0: purely quartic phase, |K_N|(1 + t2^{4N}) stays bounded
    let mut worst = 0.0f64;
    for &t in &[1.0, 10.0, 100.0, 1000.0] {
        for n in -6..=2 {
            let w = t * (4.0 * n as f64).exp2();
            if w > 2.0e4 {
                continue;
            }
            let k = k_n_integral(&OscSpec::new(t, n, 0.0, Sign::Plus, &ONE)).unwrap();
            worst = worst.max(k.norm() * (1.0 + w));
        }
    }
    assert!(worst.is_finite() && worst < 10.0, "sup |K_N|(1+t2^{{4N}}) = {worst}");
}

#[test]
fn dyadic_envelope_sum_scales_like_inverse_sqrt_t() {
    // Σ_N 2^{2N}·env_N(t) ≲ t^{−1/2} with Φ = 1 fixing N₀
    let mut ratios = Vec::new();
    for k in 0..=32 {
        let t = 10f64.powf(k as f64 / 4.0);
        let n0 = n0_index(t, 1.0).unwrap();
        let mut sum = 0.0;
        for n in -400..=400 {
            let growth = 1.0 + t * (4.0 * n as f64).exp2();
            let p = if (n - n0).abs() <= 2 { 0.5 } else { 1.0 };
            sum += (2.0 * n as f64).exp2() * growth.powf(-p);
        }
        ratios.push(sum * t.sqrt());
    }
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi < 5.0, "envelope sum × √t reached {hi}");
    assert!(lo > 0.1, "envelope sum × √t collapsed to {lo}");
}

#[test]
fn stationary_window_detected_near_n0() {
    let cfg = SpecFunConfig::<f64>::default();
    // a non-trivial amplitude: the smooth radial profile F̃ sampled along the window
    let psi = move |s: f64| profile(&cfg, ProfileKind::FTilde, s).unwrap();
    let t = vec![10.0, 100.0];
    let phi = vec![100.0, 1000.0, 8000.0];
    let n: Vec<i32> = (-4..=6).collect();
    let report = verify_lemma31(&t, &n, &phi, &psi);
    assert!(report.max_window_offset <= 3, "offset {}", report.max_window_offset);
    assert!(report.sup_inside.is_finite() && report.sup_outside.is_finite());
}

#[test]
fn taylor_identities_on_reference_profiles() {
    let x = [1.3, -0.7];
    let y = [0.4, 0.9];
    // cosine profile, second order
    let r = taylor_identity_check(&|p: f64| Complex64::from(p.cos()), 1.7, x, y, 2).unwrap();
    assert!(r < 1e-8, "cos order 2: {r:.3e}");
    // quartic monomial: order-4 remainder is exact
    let r = taylor_identity_check(&|p: f64| Complex64::from(p.powi(4)), 0.9, x, y, 4).unwrap();
    assert!(r < 1e-10, "p⁴ order 4: {r:.3e}");
    // F̃ has vanishing derivatives through order 3, enabling the order-4 identity
    let cfg = SpecFunConfig::<f64>::default();
    let f = move |p: f64| profile(&cfg, ProfileKind::FTilde, p).unwrap();
    let r = taylor_identity_check(&f, 1.0, x, y, 4).unwrap();
    assert!(r < 1e-6, "F̃ order 4: {r:.3e}");
}

proptest! {
    #[test]
    fn window_values_stay_in_unit_interval(n in -30i32..30, s in 1e-6f64..1e6) {
        let v = window(n, s);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn partition_of_unity_at_random_points(s in 1e-5f64..1e5) {
        let total: f64 = (-40..=40).map(|n| window(n, s)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
