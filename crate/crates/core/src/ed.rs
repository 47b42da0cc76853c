//! Dense exact diagonalization reference for small chains.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::hamiltonians::{ObservableSpec, SpinChainModel};
use crate::par::{self, Exec};
use crate::pauli::{i_pow, OperatorVector};
use crate::{Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 12;
/// Degenerate pairs are those closer than this fraction of the spectral width.
pub const DEFAULT_DEGENERACY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Eigenvectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Spectrum of `H` with the weights `W_mn = |O_mn|² / 2^L` of an observable.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub n_sites: usize,
    /// Ascending.
    pub energies: Vec<f64>,
    pub eigenvectors: Eigenvectors,
    pub weights: DMatrix<f64>,
}

/// Computational-basis matrix of an operator; site `j` is bit `j`.
pub fn dense_matrix(op: &OperatorVector) -> DMatrix<Complex64> {
    let dim = 1usize << op.n_sites();
    let mut m = DMatrix::zeros(dim, dim);
    for (p, c) in op.iter() {
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        let phase = i_pow((p.y_count() % 4) as u8) * c;
        for b in 0..dim {
            let s = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(b ^ x, b)] += phase * s;
        }
    }
    m
}

fn split(m: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|c| c.re), m.map(|c| c.im))
}

fn check_cap(n_sites: usize, cap: usize) -> Result<()> {
    if n_sites > cap {
        return Err(Error::DenseCapExceeded { n_sites, cap });
    }
    Ok(())
}

impl DenseSpectrum {
    pub fn new(model: &SpinChainModel, obs: &ObservableSpec) -> Result<Self> {
        Self::with_cap(model, obs, DEFAULT_DENSE_CAP)
    }

    pub fn with_cap(model: &SpinChainModel, obs: &ObservableSpec, cap: usize) -> Result<Self> {
        let n_sites = model.n_sites;
        check_cap(n_sites, cap)?;
        if obs.n_sites() != n_sites {
            return Err(Error::SizeMismatch { left: n_sites, right: obs.n_sites() });
        }
        let h = dense_matrix(&model.operator());
        let o = dense_matrix(&obs.seed);
        let scale = 1.0 / (1usize << n_sites) as f64;
        let (h_re, h_im) = split(&h);
        if h_im.iter().all(|v| *v == 0.0) {
            let eig = SymmetricEigen::try_new(h_re, f64::EPSILON, 0).ok_or(Error::EigenNoConvergence)?;
            let order = ascending(eig.eigenvalues.as_slice());
            let v = eig.eigenvectors.select_columns(&order);
            let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let (o_re, o_im) = split(&o);
            let vt = v.transpose();
            let a = &vt * (&o_re * &v);
            let b = &vt * (&o_im * &v);
            let weights = a.zip_map(&b, |x, y| (x * x + y * y) * scale);
            Ok(DenseSpectrum { n_sites, energies, eigenvectors: Eigenvectors::Real(v), weights })
        } else {
            let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or(Error::EigenNoConvergence)?;
            let order = ascending(eig.eigenvalues.as_slice());
            let v = eig.eigenvectors.select_columns(&order);
            let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let a = v.adjoint() * (&o * &v);
            let weights = a.map(|c| c.norm_sqr() * scale);
            Ok(DenseSpectrum { n_sites, energies, eigenvectors: Eigenvectors::Complex(v), weights })
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn width(&self) -> f64 {
        self.energies[self.dim() - 1] - self.energies[0]
    }

    /// `max |V†V − 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let dev = match &self.eigenvectors {
            Eigenvectors::Real(v) => (v.transpose() * v).map(Complex64::from),
            Eigenvectors::Complex(v) => v.adjoint() * v,
        };
        let id = DMatrix::<Complex64>::identity(self.dim(), self.dim());
        (dev - id).iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `C(t) = Σ_{mn} W_mn e^{i(E_m − E_n)t}`, divided by the computed total
    /// weight so that `C(0) = 1` exactly.
    pub fn autocorrelation(&self, exec: Exec, times: &[f64]) -> Vec<Complex64> {
        let n = self.dim();
        let diag: f64 = (0..n).map(|m| self.weights[(m, m)]).sum();
        let eval = |t: f64| {
            let rows = par::map_chunks(exec, n, |m| {
                let (mut re, mut im) = (0.0, 0.0);
                for k in m + 1..n {
                    let (s, c) = ((self.energies[m] - self.energies[k]) * t).sin_cos();
                    let (wmk, wkm) = (self.weights[(m, k)], self.weights[(k, m)]);
                    re += (wmk + wkm) * c;
                    im += (wmk - wkm) * s;
                }
                (re, im)
            });
            let (re, im) = rows.into_iter().fold((diag, 0.0), |a, r| (a.0 + r.0, a.1 + r.1));
            Complex64::new(re, im)
        };
        let total = eval(0.0).re;
        times.iter().map(|&t| eval(t) / total).collect()
    }

    /// Diagonal-ensemble value: total weight on pairs with `|E_m − E_n| < tol`.
    pub fn plateau(&self, tol: f64) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for m in 0..n {
            let mut lo = m;
            while lo > 0 && self.energies[m] - self.energies[lo - 1] < tol {
                lo -= 1;
            }
            let mut k = lo;
            while k < n && self.energies[k] - self.energies[m] < tol {
                total += self.weights[(m, k)];
                k += 1;
            }
        }
        total
    }

    pub fn default_degeneracy_tol(&self) -> f64 {
        DEFAULT_DEGENERACY_RTOL * self.width()
    }
}

fn ascending(vals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    order
}

pub fn autocorrelation_ed(model: &SpinChainModel, obs: &ObservableSpec, times: &[f64]) -> Result<Vec<Complex64>> {
    Ok(DenseSpectrum::new(model, obs)?.autocorrelation(Exec::default(), times))
}

/// `degeneracy_tol = None` uses `1e−10` times the spectral width.
pub fn plateau_ed(model: &SpinChainModel, obs: &ObservableSpec, degeneracy_tol: Option<f64>) -> Result<f64> {
    let spec = DenseSpectrum::new(model, obs)?;
    let tol = degeneracy_tol.unwrap_or_else(|| spec.default_degeneracy_tol());
    Ok(spec.plateau(tol))
}
