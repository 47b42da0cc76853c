//! Explicit-matrix helpers shared by the integration tests.
#![allow(dead_code)]

use finite_lanczos::pauli::{OperatorVector, Pauli, PauliString};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type M = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn single(p: Pauli) -> M {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match p {
        Pauli::I => M::from_row_slice(2, 2, &[o, z, z, o]),
        Pauli::X => M::from_row_slice(2, 2, &[z, o, o, z]),
        Pauli::Y => M::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => M::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Site 0 is the rightmost Kronecker factor.
pub fn kron_string(p: &PauliString) -> M {
    let mut m = M::from_element(1, 1, c(1.0, 0.0));
    for j in 0..p.n_sites() {
        m = single(p.site(j)).kronecker(&m);
    }
    m
}

pub fn kron_op(op: &OperatorVector) -> M {
    let d = 1usize << op.n_sites();
    let mut m = M::zeros(d, d);
    for (p, v) in op.iter() {
        m += kron_string(p) * *v;
    }
    m
}

pub fn max_abs(m: &M) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `tr(A† B) / dim`
pub fn hs(a: &M, b: &M) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>() / a.nrows() as f64
}

/// Operator Lanczos on explicit matrices with two full reorthogonalization passes.
pub fn matrix_lanczos(h: &M, seed: &M, n_max: usize) -> Vec<f64> {
    let mut basis = vec![seed / c(hs(seed, seed).re.sqrt(), 0.0)];
    let mut b = Vec::new();
    for _ in 0..n_max {
        let last = basis.last().unwrap();
        let mut a = h * last - last * h;
        for _ in 0..2 {
            for v in &basis {
                let p = hs(v, &a);
                a -= v * p;
            }
        }
        let norm = hs(&a, &a).re.sqrt();
        if norm < 1e-10 {
            break;
        }
        b.push(norm);
        basis.push(a / c(norm, 0.0));
    }
    b
}
