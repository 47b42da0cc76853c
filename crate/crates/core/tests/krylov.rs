mod common;

use finite_lanczos::hamiltonians::{
    build_edge_mode_tfim, build_ising, build_zero_mode_chain, site_observable, Boundary, NamedObservable,
    SpinChainModel,
};
use finite_lanczos::krylov::{lanczos_fo, lanczos_sa, orthogonality_report, LanczosOptions, Precision};
use finite_lanczos::par::Exec;
use finite_lanczos::pauli::Pauli;
use finite_lanczos::Error;

use common::{kron_op, matrix_lanczos};

const ALL: [NamedObservable; 4] =
    [NamedObservable::SigmaZ1, NamedObservable::SigmaZ1Z2, NamedObservable::SigmaY1, NamedObservable::SigmaX1];

fn models(n: usize) -> Vec<SpinChainModel> {
    vec![
        build_ising(1.0, -1.05, 0.5, n, Boundary::Open).unwrap(),
        build_ising(0.8, 0.6, -0.9, n, Boundary::Periodic).unwrap(),
        build_zero_mode_chain(0.3, 0.4, n).unwrap(),
    ]
}

#[test]
fn both_engines_match_matrix_lanczos() {
    let n_cmp = 18;
    for model in models(3) {
        let h = kron_op(&model.operator());
        for obs in ALL {
            let seed = obs.build(3).unwrap();
            let want = matrix_lanczos(&h, &kron_op(&seed.seed), n_cmp);
            let opts = LanczosOptions::new(n_cmp);
            let sa = lanczos_sa(&model, &seed, &opts).unwrap();
            let (fo, _) = lanczos_fo(&model, &seed, &opts).unwrap();
            let k = want.len().min(12);
            for i in 0..k {
                assert!((sa.b[i] - want[i]).abs() < 1e-9 * want[i], "SA {} {} n={}", model.label, seed.label, i + 1);
            }
            assert_eq!(fo.b.len(), want.len(), "{} {}", model.label, seed.label);
            for (i, (x, y)) in fo.b.iter().zip(&want).enumerate() {
                assert!((x - y).abs() < 1e-8 * y, "FO {} {} n={}", model.label, seed.label, i + 1);
            }
        }
    }
}

#[test]
fn two_sites_exhaust_within_operator_space() {
    for model in models(2) {
        for obs in ALL {
            let seed = obs.build(2).unwrap();
            let (fo, basis) = lanczos_fo(&model, &seed, &LanczosOptions::new(100)).unwrap();
            let t = fo.terminated.expect("two-site chain must exhaust");
            assert!(fo.b.len() <= 15, "{} {}: {} coefficients", model.label, seed.label, fo.b.len());
            assert_eq!(t, fo.b.len() + 1);
            assert_eq!(basis.len(), fo.b.len() + 1);
            let sa = lanczos_sa(&model, &seed, &LanczosOptions::new(100)).unwrap();
            assert!(sa.b.len() <= 100);
            for (x, y) in sa.b.iter().zip(&fo.b).take(fo.b.len().min(6)) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn translation_invariant_ring_gives_site_independent_coefficients() {
    let model = build_ising(1.0, -1.05, 0.5, 5, Boundary::Periodic).unwrap();
    let opts = LanczosOptions::new(40);
    let (first, _) = lanczos_fo(&model, &site_observable(5, 0, Pauli::Z).unwrap(), &opts).unwrap();
    for site in 1..5 {
        let (other, _) = lanczos_fo(&model, &site_observable(5, site, Pauli::Z).unwrap(), &opts).unwrap();
        assert_eq!(first.b.len(), other.b.len());
        for (x, y) in first.b.iter().zip(&other.b) {
            assert!((x - y).abs() < 1e-10 * x.max(1.0), "site {site}");
        }
    }
}

#[test]
fn coefficients_scale_with_the_hamiltonian() {
    let model = build_ising(1.0, -1.05, 0.5, 4, Boundary::Open).unwrap();
    let seed = NamedObservable::SigmaZ1.build(4).unwrap();
    let opts = LanczosOptions::new(30);
    let (base, _) = lanczos_fo(&model, &seed, &opts).unwrap();
    for c in [2.5, -0.4] {
        let (scaled, _) = lanczos_fo(&model.scaled(c), &seed, &opts).unwrap();
        for (x, y) in base.b.iter().zip(&scaled.b) {
            assert!((y - c.abs() * x).abs() < 1e-10 * y, "c = {c}");
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let model = build_ising(1.0, -1.05, 0.5, 6, Boundary::Open).unwrap();
    let seed = NamedObservable::SigmaZ1Z2.build(6).unwrap();
    let run = |exec| {
        let opts = LanczosOptions::new(40).exec(exec);
        (lanczos_sa(&model, &seed, &opts).unwrap(), lanczos_fo(&model, &seed, &opts).unwrap().0)
    };
    let (sa1, fo1) = run(Exec::Sequential);
    let (sa2, fo2) = run(Exec::Parallel);
    assert_eq!(sa1.b, sa2.b);
    assert_eq!(fo1.b, fo2.b);
    assert_eq!(fo1.orthogonality_drift, fo2.orthogonality_drift);
}

#[test]
fn spilled_basis_reproduces_in_memory_run() {
    let model = build_ising(1.0, -1.05, 0.5, 5, Boundary::Open).unwrap();
    let seed = NamedObservable::SigmaZ1.build(5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (mem, _) = lanczos_fo(&model, &seed, &LanczosOptions::new(60)).unwrap();
    let opts = LanczosOptions::new(60).memory_budget(Some(64 << 10)).spill_dir(Some(dir.path().to_path_buf()));
    let (spilled, mut basis) = lanczos_fo(&model, &seed, &opts).unwrap();
    assert_eq!(mem.b, spilled.b);
    assert!(!spilled.partial);
    assert!(basis.spilled_vectors() > 0);
    assert!(basis.ram_bytes() <= 64 << 10);
    basis.verify_checksums().unwrap();
    let rep = orthogonality_report(&mut basis).unwrap();
    assert!(rep.max < 1e-10, "{}", rep.max);
    assert!(rep.max_norm_deviation < 1e-12);
}

#[test]
fn budget_without_spill_marks_partial() {
    let model = build_ising(1.0, -1.05, 0.5, 5, Boundary::Open).unwrap();
    let seed = NamedObservable::SigmaZ1.build(5).unwrap();
    let opts = LanczosOptions::new(60).memory_budget(Some(64 << 10));
    let (res, basis) = lanczos_fo(&model, &seed, &opts).unwrap();
    assert!(res.partial);
    assert!(res.b.len() < 60);
    assert!(basis.ram_bytes() <= 64 << 10);
}

#[test]
fn full_orthogonalization_keeps_drift_small_and_sa_loses_it() {
    let model = build_ising(1.0, -1.05, 0.5, 6, Boundary::Open).unwrap();
    let seed = NamedObservable::SigmaZ1.build(6).unwrap();
    let opts = LanczosOptions::new(200).drift_stride(1);
    let (fo, _) = lanczos_fo(&model, &seed, &opts).unwrap();
    assert!(fo.max_drift() < 1e-10, "{}", fo.max_drift());
    let sa = lanczos_sa(&model, &seed, &opts).unwrap();
    assert_eq!(sa.orthogonality_drift.len(), sa.b.len());
    for (x, y) in sa.b.iter().zip(&fo.b).take(20) {
        assert!((x - y).abs() < 1e-8 * y);
    }
}

#[test]
fn double_double_matches_double_before_noise_matters() {
    let model = build_edge_mode_tfim(1.0, 0.5, 4).unwrap();
    let seed = NamedObservable::SigmaX1.build(4).unwrap();
    let (f, _) = lanczos_fo(&model, &seed, &LanczosOptions::new(20)).unwrap();
    let (d, _) =
        lanczos_fo(&model, &seed, &LanczosOptions::new(20).precision(Precision::DoubleDouble)).unwrap();
    assert_eq!(f.terminated, d.terminated);
    assert_eq!(f.b.len(), 7);
    for (x, y) in f.b.iter().zip(&d.b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn rejects_bad_inputs() {
    let model = build_ising(1.0, 1.0, 0.0, 4, Boundary::Open).unwrap();
    let wrong = NamedObservable::SigmaZ1.build(5).unwrap();
    assert!(matches!(lanczos_sa(&model, &wrong, &LanczosOptions::new(5)), Err(Error::SizeMismatch { .. })));
    let big = build_ising(1.0, 1.0, 0.0, 15, Boundary::Open).unwrap();
    let seed = NamedObservable::SigmaZ1.build(15).unwrap();
    assert!(matches!(lanczos_fo(&big, &seed, &LanczosOptions::new(5)), Err(Error::UnsupportedSize { .. })));
    let ok = NamedObservable::SigmaZ1.build(4).unwrap();
    assert!(lanczos_sa(&model, &ok, &LanczosOptions::new(5).prune_threshold(-1.0)).is_err());
}
