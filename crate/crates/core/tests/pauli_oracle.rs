//! Pauli algebra and Liouvillian checked against explicit Kronecker products.

mod common;

use finite_lanczos::hamiltonians::{build_edge_mode_tfim, build_ising, build_zero_mode_chain, Boundary, SpinChainModel};
use finite_lanczos::krylov::{from_dense_real, to_dense_real, DenseLiouvillian};
use finite_lanczos::par::Exec;
use finite_lanczos::pauli::{apply_liouvillian, i_pow, inner_product, OperatorVector, Pauli, PauliString};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{c, kron_op, kron_string, max_abs, M};

fn random_string(rng: &mut impl Rng, n: usize) -> PauliString {
    let mask = (1u32 << n) - 1;
    PauliString::new(n, rng.gen::<u32>() & mask, rng.gen::<u32>() & mask).unwrap()
}

fn random_hermitian(rng: &mut impl Rng, n: usize, terms: usize) -> OperatorVector {
    let t: Vec<_> = (0..terms).map(|_| (random_string(rng, n), rng.gen_range(-1.0..1.0))).collect();
    OperatorVector::from_real_terms(n, t).unwrap()
}

fn strings(n: usize) -> impl Strategy<Value = PauliString> {
    let mask = (1u32 << n) - 1;
    (any::<u32>(), any::<u32>()).prop_map(move |(x, z)| PauliString::new(n, x & mask, z & mask).unwrap())
}

#[test]
fn every_three_site_product_matches_matrices() {
    let n = 3;
    for a in 0..64 {
        for b in 0..64 {
            let pa = PauliString::from_dense_index(n, a).unwrap();
            let pb = PauliString::from_dense_index(n, b).unwrap();
            let (r, k) = pa.multiply(&pb).unwrap();
            let lhs = kron_string(&pa) * kron_string(&pb);
            let rhs = kron_string(&r) * i_pow(k);
            assert!(max_abs(&(lhs - rhs)) < 1e-14, "{pa} * {pb}");
        }
    }
}

#[test]
fn hermitian_strings_are_hermitian_matrices() {
    for k in 0..256 {
        let p = PauliString::from_dense_index(4, k).unwrap();
        let m = kron_string(&p);
        assert!(max_abs(&(m.adjoint() - &m)) == 0.0, "{p}");
        assert!(max_abs(&(&m * &m - M::identity(16, 16))) == 0.0);
    }
}

#[test]
fn commutator_terms_match_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..400 {
        let a = random_string(&mut rng, 4);
        let b = random_string(&mut rng, 4);
        let ma = kron_string(&a);
        let mb = kron_string(&b);
        let comm = &ma * &mb - &mb * &ma;
        match a.commutator_term(&b).unwrap() {
            None => assert!(max_abs(&comm) == 0.0),
            Some((r, coeff)) => assert!(max_abs(&(comm - kron_string(&r) * coeff)) < 1e-14),
        }
    }
}

#[test]
fn operator_products_and_liouvillian_match_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2usize, 3, 4] {
        let h = random_hermitian(&mut rng, n, 6);
        let a = random_hermitian(&mut rng, n, 5);
        let (mh, ma) = (kron_op(&h), kron_op(&a));
        assert!(max_abs(&(kron_op(&h.mul(&a).unwrap()) - &mh * &ma)) < 1e-12);
        let comm = &mh * &ma - &ma * &mh;
        assert!(max_abs(&(kron_op(&apply_liouvillian(&h, &a).unwrap()) - comm)) < 1e-12);
        let ip = inner_product(&a, &h).unwrap();
        let tr = (ma.adjoint() * &mh).trace() / (1u32 << n) as f64;
        assert!((ip - tr).norm() < 1e-12);
    }
}

#[test]
fn dense_liouvillian_is_minus_i_commutator() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [2usize, 3, 4] {
        let h = random_hermitian(&mut rng, n, 7);
        let r = random_hermitian(&mut rng, n, 9);
        let liou = DenseLiouvillian::from_operator(&h, Exec::Sequential).unwrap();
        let out = liou.apply(&to_dense_real(&r).unwrap());
        let got = kron_op(&from_dense_real(n, 0, &out).unwrap());
        let (mh, mr) = (kron_op(&h), kron_op(&r));
        let want = (&mh * &mr - &mr * &mh) * c(0.0, -1.0);
        assert!(max_abs(&(got - want)) < 1e-12, "n = {n}");
    }
}

#[test]
fn dense_liouvillian_is_antisymmetric_and_bounded() {
    let model = build_ising(1.0, -1.05, 0.5, 3, Boundary::Periodic).unwrap();
    let liou = DenseLiouvillian::new(&model, Exec::Sequential).unwrap();
    let d = liou.dim();
    let mut s = vec![0.0; d * d];
    let mut e = vec![0.0; d];
    for j in 0..d {
        e[j] = 1.0;
        for (i, v) in liou.apply(&e).into_iter().enumerate() {
            s[i * d + j] = v;
        }
        e[j] = 0.0;
    }
    let mut col_max = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            assert_eq!(s[i * d + j], -s[j * d + i]);
        }
        col_max = col_max.max((0..d).map(|j| s[j * d + i].abs()).sum());
    }
    assert!(col_max <= 2.0 * liou.norm_bound() + 1e-12);
}

fn explicit_two(n: usize, i: usize, j: usize, p: Pauli) -> M {
    kron_string(&PauliString::from_ops(n, &[(i, p), (j, p)]).unwrap())
}

fn explicit_one(n: usize, i: usize, p: Pauli) -> M {
    kron_string(&PauliString::single(n, i, p).unwrap())
}

fn assert_model(model: &SpinChainModel, want: &M) {
    assert!(max_abs(&(kron_op(&model.operator()) - want)) < 1e-14, "{}", model.label);
}

#[test]
fn builders_match_explicit_sums() {
    let n = 4;
    let d = 1 << n;
    let (j, hx, hz) = (0.7, -1.1, 0.4);
    for boundary in [Boundary::Open, Boundary::Periodic] {
        let mut want = M::zeros(d, d);
        let last = if boundary == Boundary::Periodic { n } else { n - 1 };
        for i in 0..last {
            want += explicit_two(n, i, (i + 1) % n, Pauli::X) * c(j, 0.0);
        }
        for i in 0..n {
            want += explicit_one(n, i, Pauli::X) * c(hx, 0.0) + explicit_one(n, i, Pauli::Z) * c(hz, 0.0);
        }
        assert_model(&build_ising(j, hx, hz, n, boundary).unwrap(), &want);
    }

    let (u, mu) = (0.3, 0.8);
    let mut want = M::zeros(d, d);
    for i in 0..n - 1 {
        want -= explicit_two(n, i, i + 1, Pauli::X);
        want += explicit_two(n, i, i + 1, Pauli::Z) * c(u, 0.0);
    }
    for i in 0..n {
        want -= explicit_one(n, i, Pauli::Z) * c(mu / 2.0, 0.0);
    }
    assert_model(&build_zero_mode_chain(u, mu, n).unwrap(), &want);

    let (jj, h) = (1.0, 0.4);
    let mut want = M::zeros(d, d);
    for i in 0..n - 1 {
        want -= explicit_two(n, i, i + 1, Pauli::X) * c(jj, 0.0);
    }
    for i in 0..n {
        want -= explicit_one(n, i, Pauli::Z) * c(h, 0.0);
    }
    assert_model(&build_edge_mode_tfim(jj, h, n).unwrap(), &want);
}

#[test]
fn two_site_ring_doubles_the_bond() {
    let m = build_ising(1.0, 0.0, 0.0, 2, Boundary::Periodic).unwrap();
    let want = explicit_two(2, 0, 1, Pauli::X) * c(2.0, 0.0);
    assert_model(&m, &want);
}

proptest! {
    #[test]
    fn product_is_associative(a in strings(5), b in strings(5), cc in strings(5)) {
        let (ab, k1) = a.multiply(&b).unwrap();
        let (ab_c, k2) = ab.multiply(&cc).unwrap();
        let (bc, k3) = b.multiply(&cc).unwrap();
        let (a_bc, k4) = a.multiply(&bc).unwrap();
        prop_assert_eq!(ab_c, a_bc);
        prop_assert_eq!((k1 + k2) % 4, (k3 + k4) % 4);
    }

    #[test]
    fn square_is_identity(a in strings(6)) {
        let (r, k) = a.multiply(&a).unwrap();
        prop_assert!(r.is_identity());
        prop_assert_eq!(k, 0);
    }

    #[test]
    fn commutator_is_antisymmetric(a in strings(6), b in strings(6)) {
        match (a.commutator_term(&b).unwrap(), b.commutator_term(&a).unwrap()) {
            (None, None) => prop_assert!(a.commutes_with(&b).unwrap()),
            (Some((r1, c1)), Some((r2, c2))) => {
                prop_assert_eq!(r1, r2);
                prop_assert!((c1 + c2).norm() == 0.0);
                prop_assert!((c1.norm() - 2.0).abs() == 0.0);
            }
            _ => prop_assert!(false, "one-sided commutator"),
        }
    }

    #[test]
    fn dense_index_round_trips(a in strings(7)) {
        let back = PauliString::from_dense_index(7, a.dense_index()).unwrap();
        prop_assert_eq!(back, a);
        prop_assert_eq!(PauliString::parse(7, &a.to_string()).unwrap(), a);
    }

    #[test]
    fn commutator_of_hermitian_is_anti_hermitian(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, 4, 5);
        let a = random_hermitian(&mut rng, 4, 5);
        let comm = apply_liouvillian(&h, &a).unwrap();
        prop_assert!(comm.is_anti_hermitian(1e-12));
        prop_assert!(inner_product(&a, &comm).unwrap().norm() < 1e-12);
    }
}
