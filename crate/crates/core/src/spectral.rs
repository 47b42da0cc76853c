//! Quantities computed from the Lanczos coefficients alone.
//!
//! In the Krylov basis the Liouvillian is the symmetric tridiagonal matrix
//! with zero diagonal and off-diagonal `b_1, ..., b_N`, of dimension `N + 1`.
//! The seed is the first basis vector, so `C(t) = ⟨1| e^{iLt} |1⟩`.

use num_complex::Complex64;
use serde::Serialize;

use crate::par::{self, Exec};
use crate::{Error, Result};

const QL_MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalLiouvillian {
    b: Vec<f64>,
}

/// Eigenvalues with the squared first components of their eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSpectrum {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TridiagonalLiouvillian {
    pub fn new(b: &[f64]) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::EmptySequence);
        }
        for (i, &v) in b.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveCoefficient { index: i + 1, value: v });
            }
        }
        Ok(TridiagonalLiouvillian { b: b.to_vec() })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.len() + 1
    }

    /// Implicit QL with Wilkinson-type shifts, rotating only the first row of
    /// the eigenvector matrix.
    pub fn seed_spectrum(&self) -> Result<SeedSpectrum> {
        let n = self.dim();
        let mut d = vec![0.0f64; n];
        let mut e: Vec<f64> = self.b.iter().copied().chain(std::iter::once(0.0)).collect();
        let mut z = vec![0.0; n];
        z[0] = 1.0;
        let anorm = 2.0 * self.b.iter().copied().fold(0.0, f64::max);
        for l in 0..n {
            let mut sweeps = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd.max(anorm) {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                sweeps += 1;
                if sweeps > QL_MAX_SWEEPS {
                    return Err(Error::EigenNoConvergence);
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut underflow = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let bb = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * bb;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - bb;
                    let zf = z[i + 1];
                    z[i + 1] = s * z[i] + c * zf;
                    z[i] = c * z[i] - s * zf;
                }
                if underflow {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|v| v * v)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (energies, weights) = pairs.into_iter().unzip();
        Ok(SeedSpectrum { energies, weights })
    }
}

/// Largest `|Im C(t)|` over a sampled curve.
pub fn max_imaginary(values: &[Complex64]) -> f64 {
    values.iter().fold(0.0, |m, c| m.max(c.im.abs()))
}

/// `C(t) = Σ_k |⟨1|ψ_k⟩|² e^{i E_k t}`. The imaginary part is returned as
/// computed.
pub fn autocorrelation_from_b(b: &[f64], times: &[f64]) -> Result<Vec<Complex64>> {
    let spec = TridiagonalLiouvillian::new(b)?.seed_spectrum()?;
    Ok(autocorrelation_from_spectrum(&spec, times))
}

/// Divided by the summed weights, so `C(0) = 1` exactly.
pub fn autocorrelation_from_spectrum(spec: &SeedSpectrum, times: &[f64]) -> Vec<Complex64> {
    let eval = |t: f64| -> Complex64 {
        spec.energies
            .iter()
            .zip(&spec.weights)
            .map(|(&e, &w)| Complex64::from_polar(w, e * t))
            .sum()
    };
    let total = eval(0.0).re;
    times.iter().map(|&t| eval(t) / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroMode {
    /// `φ_1, φ_2, ...`, normalized, `φ_1 > 0`, zero on even positions.
    pub phi: Vec<f64>,
    /// `ln Σ φ_n²` of the unnormalized recursion with `φ_1 = 1`.
    pub log_norm_sqr: f64,
    pub overlap_sq: f64,
}

impl ZeroMode {
    /// `max_n |b_n φ_n + b_{n+1} φ_{n+2}|` over odd `n`.
    pub fn residual(&self, b: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut n = 1;
        while n + 1 <= b.len() {
            let r = b[n - 1] * self.phi[n - 1] + b[n] * self.phi[n + 1];
            worst = worst.max(r.abs());
            n += 2;
        }
        worst
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Null vector of the tridiagonal matrix, built from the recursion
/// `φ_{n+2} = −(b_n / b_{n+1}) φ_n` in log-magnitude and sign form.
/// Only odd dimensions (even `N`) have one.
pub fn zero_mode(b: &[f64]) -> Result<Option<ZeroMode>> {
    let tri = TridiagonalLiouvillian::new(b)?;
    if tri.dim() % 2 == 0 {
        return Ok(None);
    }
    let n = tri.dim();
    let mut log_mag = Vec::with_capacity(n.div_ceil(2));
    let mut sign = Vec::with_capacity(n.div_ceil(2));
    let (mut lm, mut sg) = (0.0f64, 1.0f64);
    log_mag.push(lm);
    sign.push(sg);
    let mut k = 1;
    while k + 1 <= b.len() {
        lm += b[k - 1].ln() - b[k].ln();
        sg = -sg;
        log_mag.push(lm);
        sign.push(sg);
        k += 2;
    }
    let doubled: Vec<f64> = log_mag.iter().map(|l| 2.0 * l).collect();
    let log_norm_sqr = log_sum_exp(&doubled);
    let mut phi = vec![0.0; n];
    for (j, (l, s)) in log_mag.iter().zip(&sign).enumerate() {
        phi[2 * j] = s * (l - 0.5 * log_norm_sqr).exp();
    }
    let overlap_sq = (-log_norm_sqr).exp();
    Ok(Some(ZeroMode { phi, log_norm_sqr, overlap_sq }))
}

/// Both readings of the plateau for a finite coefficient list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauReadings {
    /// Seed weight on the exact zero eigenvector; 0 for even dimension.
    pub strict: f64,
    /// `1 / (1 + Σ_{k ≤ ⌊N/2⌋} Π_{m ≤ k} (b_{2m−1} / b_{2m})²)`.
    pub series: f64,
    pub dimension: usize,
}

impl PlateauReadings {
    pub fn value(&self) -> f64 {
        self.strict
    }
}

pub fn plateau_from_b(b: &[f64]) -> Result<PlateauReadings> {
    let dimension = TridiagonalLiouvillian::new(b)?.dim();
    let strict = zero_mode(b)?.map_or(0.0, |z| z.overlap_sq);
    Ok(PlateauReadings { strict, series: plateau_series(b)?, dimension })
}

/// Direct evaluation of the truncated product series, in log domain.
pub fn plateau_series(b: &[f64]) -> Result<f64> {
    TridiagonalLiouvillian::new(b)?;
    let mut logs = vec![0.0];
    let mut acc = 0.0;
    for pair in b.chunks_exact(2) {
        acc += 2.0 * (pair[0] / pair[1]).ln();
        logs.push(acc);
    }
    Ok((-log_sum_exp(&logs)).exp())
}

/// `Φ(ω) = Im ⟨1|(ω − iε − L)^{−1}|1⟩ / π` from the terminating continued
/// fraction `D_{N+1} = z`, `D_k = z − b_k² / D_{k+1}`.
pub fn spectral_density(b: &[f64], omegas: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    spectral_density_with(Exec::default(), b, omegas, epsilon)
}

pub fn spectral_density_with(exec: Exec, b: &[f64], omegas: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    TridiagonalLiouvillian::new(b)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: format!("{epsilon} is not positive") });
    }
    const GRID_CHUNK: usize = 64;
    let eval = |w: f64| {
        let z = Complex64::new(w, -epsilon);
        let mut d = z;
        for bk in b.iter().rev() {
            d = z - bk * bk / d;
        }
        (1.0 / d).im / std::f64::consts::PI
    };
    let chunks = par::map_chunks(exec, omegas.len().div_ceil(GRID_CHUNK), |c| {
        let end = ((c + 1) * GRID_CHUNK).min(omegas.len());
        omegas[c * GRID_CHUNK..end].iter().map(|&w| eval(w)).collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

/// Ten mean level spacings of the tridiagonal spectrum.
pub fn default_broadening(b: &[f64]) -> Result<f64> {
    let spec = TridiagonalLiouvillian::new(b)?.seed_spectrum()?;
    Ok(default_broadening_from(&spec))
}

pub fn default_broadening_from(spec: &SeedSpectrum) -> f64 {
    let width = spec.energies.last().unwrap() - spec.energies[0];
    10.0 * width / (spec.energies.len() - 1) as f64
}
