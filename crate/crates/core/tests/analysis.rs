use finite_lanczos::analysis::{
    analyze, asymptotic_regime_check, biexp_fit, classify_convergence, collapse_curve, cumulative_product,
    detect_nstar, lgamma_estimate, product_and_partial_sums, rates, series_diverges, synthetic_bn,
    AsymptoticFamily, PlateauVerdict, SyntheticFamily,
};
use finite_lanczos::hamiltonians::{build_edge_mode_tfim, build_ising, Boundary, NamedObservable};
use finite_lanczos::krylov::{lanczos_fo, LanczosOptions};
use finite_lanczos::spectral::plateau_from_b;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn edge_mode_rates_are_constant() {
    let (j, h) = (1.0, 0.5);
    let model = build_edge_mode_tfim(j, h, 4).unwrap();
    let (fo, _) = lanczos_fo(&model, &NamedObservable::SigmaX1.build(4).unwrap(), &LanczosOptions::new(50)).unwrap();
    let r = rates(&fo.b).unwrap();
    assert!(!r.is_empty());
    for g in &r.gamma {
        assert!((g - 2.0 * (j / h).ln()).abs() < 1e-10, "{g}");
    }
}

#[test]
fn ising_crossover_is_of_order_l() {
    for (l, boundary) in [(6usize, Boundary::Open), (8, Boundary::Periodic)] {
        let model = build_ising(1.0, 1.0, 1.5, l, boundary).unwrap();
        let (fo, _) =
            lanczos_fo(&model, &NamedObservable::SigmaZ1.build(l).unwrap(), &LanczosOptions::new(150)).unwrap();
        let ns = detect_nstar(&fo.b).unwrap();
        assert!(ns % 2 == 1);
        assert!(ns >= l / 2 && ns <= 4 * l, "L={l}: n* = {ns}");
    }
}

#[test]
fn products_from_rates_equal_direct_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b: Vec<f64> = (1..=301).map(|n| (n as f64).min(40.0) * rng.gen_range(0.8..1.2)).collect();
    let ns = detect_nstar(&b).unwrap();
    let cp = cumulative_product(&rates(&b).unwrap(), ns).unwrap();
    let mut direct = 1.0f64;
    for (j, lf) in cp.log_f.iter().enumerate() {
        let n = ns + 2 * j;
        direct *= (b[n - 1] / b[n]).powi(2);
        assert!((lf.exp() - direct).abs() < 1e-12 * direct, "j = {j}");
    }
}

#[test]
fn ratio_quantities_are_scale_invariant() {
    let b: Vec<f64> =
        (1..=120).map(|n| if n < 15 { n as f64 } else { 15.0 + (n % 2) as f64 * 0.3 - 0.01 * n as f64 }).collect();
    let base = analyze(&b, 8, 1, 1, None).unwrap();
    for c in [0.01, 7.5] {
        let scaled: Vec<f64> = b.iter().map(|x| x * c).collect();
        let other = analyze(&scaled, 8, 1, 1, None).unwrap();
        assert_eq!(base.n_star, other.n_star);
        for (x, y) in base.rates.gamma.iter().zip(&other.rates.gamma) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in base.cumulative.log_f.iter().zip(&other.cumulative.log_f) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in base.collapse.iter().zip(&other.collapse) {
            assert!((x.1 - y.1).abs() < 1e-8 * x.1.abs().max(1.0));
        }
        assert!((base.plateau.series - other.plateau.series).abs() < 1e-12);
    }
}

#[test]
fn biexponential_recovery() {
    let f: Vec<f64> = (0..400).map(|n| 0.7 * (-0.01 * n as f64).exp() + 0.3 * (-0.1 * n as f64).exp()).collect();
    let fit = biexp_fit(&f, None).unwrap();
    for (got, want) in [(fit.a1, 0.7), (fit.c1, 0.01), (fit.a2, 0.3), (fit.c2, 0.1)] {
        assert!(rel(got, want) < 1e-6, "{fit:?}");
    }
    let gb = 1.0 / (0.7 / 0.01 + 0.3 / 0.1);
    assert!(rel(fit.gamma_bar, gb) < 1e-6);

    let gamma = 0.037;
    let single: Vec<f64> = (0..300).map(|n| (-gamma * n as f64).exp()).collect();
    let fit = biexp_fit(&single, None).unwrap();
    assert!(rel(fit.gamma_bar, gamma) < 1e-6, "{fit:?}");
    for j in [0.0, 100.0, 299.0] {
        assert!(rel(fit.eval(j), (-gamma * j).exp()) < 1e-6);
    }
}

#[test]
fn biexponential_fit_tolerates_tiny_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let f: Vec<f64> = (0..300)
        .map(|n| {
            let v = 0.55 * (-0.02 * n as f64).exp() + 0.45 * (-0.3 * n as f64).exp();
            v * (1.0 + 1e-8 * rng.gen_range(-1.0..1.0))
        })
        .collect();
    let fit = biexp_fit(&f, None).unwrap();
    assert!(fit.residual < 1e-6, "{}", fit.residual);
    assert!(rel(fit.c1, 0.02) < 1e-4);
}

#[test]
fn collapse_of_pure_exponential_is_flat() {
    let gamma = 0.02;
    let log_f: Vec<f64> = (0..50).map(|j| -gamma * j as f64).collect();
    for (n, v) in collapse_curve(&log_f, 9, 1, 1).unwrap() {
        assert!((v - gamma * 81.0).abs() < 1e-12, "n = {n}");
    }
    assert!(collapse_curve(&log_f, 9, 0, 1).is_err());
}

#[test]
fn staggered_family_has_nonzero_plateau() {
    for c in [0.2, 0.5] {
        let b = synthetic_bn(SyntheticFamily::StaggeredLinear { c }, 200_000).unwrap();
        let r = rates(&b).unwrap();
        let tail: Vec<f64> = r.n.iter().zip(&r.gamma).filter(|(n, _)| **n > 100_000).map(|(n, g)| *n as f64 * g).collect();
        let want = 2.0 + 4.0 * c;
        for v in &tail {
            assert!((v - want).abs() < 1e-3, "c = {c}: nΓ = {v}");
        }
        // P(n) ~ n^{-(1+2c)}, so successive decades add to Σ P in ratio 10^{2c}
        let s = |n: usize| 1.0 / plateau_from_b(&b[..n]).unwrap().series;
        let (s3, s4, s5) = (s(2_000), s(20_000), s(200_000));
        assert!(s3 < s4 && s4 < s5 && s5 < 2.0 * s3);
        let ratio = (s4 - s3) / (s5 - s4);
        assert!(rel(ratio, 10f64.powf(2.0 * c)) < 0.1, "c = {c}: {ratio}");
    }
    let b = synthetic_bn(SyntheticFamily::StaggeredLinear { c: 0.5 }, 6).unwrap();
    assert_eq!(b, vec![0.5, 2.5, 2.5, 4.5, 4.5, 6.5]);
}

#[test]
fn subleading_rates_follow_expansion() {
    for rho in [-3.0, 0.0, 1.0, 4.0] {
        let b = synthetic_bn(SyntheticFamily::SubleadingLog { rho, offset: 2 }, 1_000_001).unwrap();
        let r = rates(&b).unwrap();
        let scaled_error = |n: usize| {
            let g = r.get(n).unwrap();
            let nf = n as f64;
            nf * (g - 2.0 / nf + 2.0 * (1.0 + rho) / (nf * nf.ln()))
        };
        let (e4, e6) = (scaled_error(10_001), scaled_error(999_999));
        assert!(e6.abs() < e4.abs(), "rho = {rho}: {e4} then {e6}");
        assert!(e6.abs() < 0.1 * (2.0 * (1.0 + rho) / 999_999f64.ln()).abs().max(0.1), "rho = {rho}: {e6}");
    }
}

#[test]
fn classifier_agrees_with_direct_summation() {
    for alpha in [0.0, 0.3, 1.0, 2.0] {
        for beta in [0.5, 1.0, 2.0, 3.0] {
            let (ns, _, sums) = product_and_partial_sums(AsymptoticFamily { alpha, beta }, 1_000_000);
            let diverges = series_diverges(&ns, &sums);
            let verdict = classify_convergence(alpha, beta).unwrap();
            assert_eq!(diverges, verdict == PlateauVerdict::PlateauZero, "alpha = {alpha}, beta = {beta}");
        }
    }
}

#[test]
fn regime_examples() {
    let r = asymptotic_regime_check(AsymptoticFamily { alpha: 2.0, beta: 1.0 }, 100_000).unwrap();
    assert!(r.agrees, "{r:?}");
    assert!(r.inverse_n_spread.unwrap() < 0.02);
    let r = asymptotic_regime_check(AsymptoticFamily { alpha: 1.0, beta: 0.0 }, 1000).unwrap();
    assert!(r.agrees && rel(r.fitted_slope, 0.5) < 0.02, "{r:?}");
    // the product saturates, so the plateau series grows linearly
    let r = asymptotic_regime_check(AsymptoticFamily { alpha: 3.0, beta: 2.0 }, 100_000).unwrap();
    assert!(r.agrees && r.diverges && r.verdict == PlateauVerdict::PlateauZero, "{r:?}");
    assert!(asymptotic_regime_check(AsymptoticFamily { alpha: 1.0, beta: 1.0 }, 500).unwrap().warning.is_some());
}

#[test]
fn lgamma_estimate_tracks_plateau_on_synthetic_sequence() {
    for (n_star, gamma) in [(9usize, 0.2), (11, 0.05), (15, 0.1)] {
        let b = synthetic_bn(SyntheticFamily::LinearThenPlateau { n_star, height: 10.0, gamma }, 4000).unwrap();
        let est = lgamma_estimate(&b, 8, None).unwrap();
        let exact = plateau_from_b(&b).unwrap().series;
        assert!(rel(est.two_piece, exact) < 0.3, "n* = {n_star}, γ = {gamma}: {} vs {exact}", est.two_piece);
        // F(j) = e^{-γ(j+1)} has amplitude e^{-γ}
        assert!(rel(est.gamma_bar, gamma * gamma.exp()) < 1e-6);
    }
}

#[test]
fn constant_sequence_has_no_decay() {
    let b = synthetic_bn(SyntheticFamily::Constant { value: 2.0 }, 40).unwrap();
    assert!(rates(&b).unwrap().gamma.iter().all(|g| *g == 0.0));
    let cp = cumulative_product(&rates(&b).unwrap(), 1).unwrap();
    assert!(cp.values().iter().all(|f| *f == 1.0));
    let fit = biexp_fit(&cp.values(), None).unwrap();
    assert_eq!(fit.gamma_bar, 0.0);
    assert_eq!(classify_convergence(0.0, 0.0).unwrap(), PlateauVerdict::PlateauZero);
}
