//! Rates, crossover, cumulative products, fits and the convergence classifier.
//!
//! Indices follow the coefficient labels: `b[0]` is `b_1`. Rates live on odd
//! `n` only, `Γ_n = −2 ln(b_n / b_{n+1})`.

use std::ops::Range;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::spectral::{plateau_from_b, PlateauReadings};
use crate::{Error, Result};

/// Points required after the global maximum of `b` before a crossover is accepted.
pub const NSTAR_MIN_TAIL: usize = 5;
pub const FIT_MIN_POINTS: usize = 8;
/// Relative agreement demanded by [`asymptotic_regime_check`].
pub const REGIME_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSequence {
    /// Odd labels `1, 3, 5, ...`.
    pub n: Vec<usize>,
    pub gamma: Vec<f64>,
}

impl RateSequence {
    pub fn get(&self, n: usize) -> Option<f64> {
        if n % 2 == 0 {
            return None;
        }
        self.gamma.get((n - 1) / 2).copied()
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

fn check_positive(b: &[f64]) -> Result<()> {
    for (i, &v) in b.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveCoefficient { index: i + 1, value: v });
        }
    }
    Ok(())
}

pub fn rates(b: &[f64]) -> Result<RateSequence> {
    if b.len() < 2 {
        return Err(Error::InvalidParameter { name: "b", reason: format!("need at least 2 coefficients, got {}", b.len()) });
    }
    check_positive(b)?;
    let (n, gamma) = (1..b.len())
        .step_by(2)
        .map(|n| (n, -2.0 * (b[n - 1] / b[n]).ln()))
        .unzip();
    Ok(RateSequence { n, gamma })
}

/// Smallest odd `n` beyond the global maximum of `b`.
pub fn detect_nstar(b: &[f64]) -> Result<usize> {
    if b.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_positive(b)?;
    let argmax = b
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > b[best] { i } else { best })
        + 1;
    let after = b.len() - argmax;
    let nstar = if argmax % 2 == 0 { argmax + 1 } else { argmax + 2 };
    if after < NSTAR_MIN_TAIL || nstar + 1 > b.len() {
        return Err(Error::NoCrossover { argmax, after });
    }
    Ok(nstar)
}

/// `log F(j) = −Σ_{j' ≤ j} Γ_{n* + 2j'}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeProduct {
    pub n_star: usize,
    pub log_f: Vec<f64>,
}

impl CumulativeProduct {
    pub fn values(&self) -> Vec<f64> {
        self.log_f.iter().map(|l| l.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.log_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_f.is_empty()
    }
}

pub fn cumulative_product(rates: &RateSequence, n_star: usize) -> Result<CumulativeProduct> {
    if n_star % 2 == 0 || n_star == 0 {
        return Err(Error::InvalidParameter { name: "n_star", reason: format!("{n_star} is not odd") });
    }
    let start = (n_star - 1) / 2;
    if start >= rates.len() {
        return Err(Error::OutOfRange { index: n_star, max: 2 * rates.len() - 1 });
    }
    let mut acc = 0.0;
    let log_f = rates.gamma[start..]
        .iter()
        .map(|g| {
            acc -= g;
            acc
        })
        .collect();
    Ok(CumulativeProduct { n_star, log_f })
}

/// `F(j) ≈ a1 e^{−c1 j} + a2 e^{−c2 j}` with `c1 ≤ c2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiexpFit {
    pub a1: f64,
    pub c1: f64,
    pub a2: f64,
    pub c2: f64,
    /// Euclidean norm of the residual over the window.
    pub residual: f64,
    pub window: (usize, usize),
    pub gamma_bar: f64,
}

impl BiexpFit {
    pub fn eval(&self, j: f64) -> f64 {
        self.a1 * (-self.c1 * j).exp() + self.a2 * (-self.c2 * j).exp()
    }

    fn terms(&self) -> Vec<(f64, f64)> {
        let amax = self.a1.max(self.a2);
        [(self.a1, self.c1), (self.a2, self.c2)]
            .into_iter()
            .filter(|(a, _)| *a > 1e-12 * amax)
            .collect()
    }
}

/// `(Σ a_i / c_i)^{−1}` over terms with non-negligible amplitude; 0 when a
/// retained rate is not positive.
pub fn gamma_bar(a1: f64, c1: f64, a2: f64, c2: f64) -> f64 {
    let fit = BiexpFit { a1, c1, a2, c2, residual: 0.0, window: (0, 0), gamma_bar: 0.0 };
    let terms = fit.terms();
    if terms.is_empty() || terms.iter().any(|(_, c)| *c <= 0.0) {
        return 0.0;
    }
    1.0 / terms.iter().map(|(a, c)| a / c).sum::<f64>()
}

struct Lm<'a> {
    s: &'a [f64],
    y: &'a [f64],
}

impl Lm<'_> {
    fn cost(&self, p: &Vector4<f64>) -> f64 {
        self.s
            .iter()
            .zip(self.y)
            .map(|(&s, &y)| {
                let r = p[0] * (-p[1] * s).exp() + p[2] * (-p[3] * s).exp() - y;
                r * r
            })
            .sum()
    }

    fn normal_equations(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let mut a = Matrix4::zeros();
        let mut g = Vector4::zeros();
        for (&s, &y) in self.s.iter().zip(self.y) {
            let (e1, e2) = ((-p[1] * s).exp(), (-p[3] * s).exp());
            let r = p[0] * e1 + p[2] * e2 - y;
            let jr = Vector4::new(e1, -s * p[0] * e1, e2, -s * p[2] * e2);
            a += jr * jr.transpose();
            g += jr * r;
        }
        (a, g)
    }

    /// Projected Levenberg–Marquardt. `None` when the iteration cap is hit.
    fn run(&self, mut p: Vector4<f64>) -> Option<(Vector4<f64>, f64)> {
        let project = |mut q: Vector4<f64>| {
            q[0] = q[0].max(0.0);
            q[2] = q[2].max(0.0);
            q
        };
        p = project(p);
        let mut cost = self.cost(&p);
        if !cost.is_finite() {
            return None;
        }
        let mut lambda = 1e-3;
        for _ in 0..2000 {
            let (a, g) = self.normal_equations(&p);
            let mut improved = false;
            while lambda < 1e16 {
                let mut damped = a;
                for k in 0..4 {
                    damped[(k, k)] += lambda * a[(k, k)].max(1e-30);
                }
                let Some(step) = damped.lu().solve(&(-g)) else {
                    lambda *= 4.0;
                    continue;
                };
                let trial = project(p + step);
                let c = self.cost(&trial);
                if c.is_finite() && c < cost {
                    let moved = (trial - p).amax() <= 1e-14 * p.amax().max(1e-300);
                    let flat = cost - c <= 1e-15 * cost;
                    p = trial;
                    cost = c;
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = true;
                    if moved || flat {
                        return Some((p, cost));
                    }
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                return Some((p, cost));
            }
        }
        None
    }
}

/// Log-linear least squares on the positive samples: `(A, γ)` with `y ≈ A e^{−γ s}`.
fn single_exponential(s: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = s.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, v)| (*a, v.ln())).collect();
    if pts.len() < 2 {
        return (y.iter().copied().fold(0.0, f64::max).max(1e-300), 0.0);
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, intercept) = linear_fit(&xs, &ys);
    (intercept.exp(), -slope)
}

/// Bi-exponential least squares on `F` directly, uniform weights.
///
/// `window` indexes `f`; `None` uses all of it.
pub fn biexp_fit(f: &[f64], window: Option<Range<usize>>) -> Result<BiexpFit> {
    let w = window.unwrap_or(0..f.len());
    if w.end > f.len() || w.start >= w.end {
        return Err(Error::OutOfRange { index: w.end, max: f.len() });
    }
    if w.len() < FIT_MIN_POINTS {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("{} points, need at least {FIT_MIN_POINTS}", w.len()),
        });
    }
    let span = (w.len() - 1) as f64;
    let s: Vec<f64> = w.clone().map(|j| j as f64 / span).collect();
    let y = &f[w.clone()];
    let lm = Lm { s: &s, y };
    let (a, g) = single_exponential(&s, y);
    let gs = if g.abs() < 1e-3 { 1e-3 } else { g };
    let mut starts = vec![Vector4::new(a, g, 0.0, g)];
    for (frac, lo, hi) in [(0.5, 0.5, 2.0), (0.8, 0.5, 3.0), (0.9, 0.9, 10.0), (0.3, 0.2, 1.5), (0.7, 0.1, 5.0), (0.95, 1.0, 30.0)] {
        starts.push(Vector4::new(frac * a, gs * lo, (1.0 - frac) * a, gs * hi));
    }
    let mut best: Option<(Vector4<f64>, f64)> = None;
    let mut best_any = f64::INFINITY;
    for p0 in starts {
        if let Some((p, c)) = lm.run(p0) {
            best_any = best_any.min(c);
            if best.as_ref().map_or(true, |b| c < b.1) {
                best = Some((p, c));
            }
        }
    }
    let Some((p, cost)) = best else {
        return Err(Error::FitFailed { best_residual: best_any.sqrt() });
    };
    let (mut a1, mut c1, mut a2, mut c2) = (p[0], p[1] / span, p[2], p[3] / span);
    // Sample positions are absolute, so amplitudes already refer to j = 0.
    if c1 > c2 {
        std::mem::swap(&mut a1, &mut a2);
        std::mem::swap(&mut c1, &mut c2);
    }
    Ok(BiexpFit {
        a1,
        c1,
        a2,
        c2,
        residual: cost.sqrt(),
        window: (w.start, w.end),
        gamma_bar: gamma_bar(a1, c1, a2, c2),
    })
}

/// `(n, −log F(n) · L^{md+1} / n)` for `n ≥ 1`, with `log_f[n] = log F(n)`.
pub fn collapse_curve(log_f: &[f64], n_sites: usize, m: u32, d: u32) -> Result<Vec<(usize, f64)>> {
    if m < 1 || d < 1 {
        return Err(Error::InvalidParameter { name: "m, d", reason: format!("m = {m}, d = {d} must be at least 1") });
    }
    let scale = (n_sites as f64).powi((m * d + 1) as i32);
    Ok(log_f.iter().enumerate().skip(1).map(|(n, l)| (n, -l * scale / n as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateauVerdict {
    PlateauNonzero,
    PlateauZero,
}

/// Convergence of the plateau series for `Γ_n ≃ α / n^β`.
pub fn classify_convergence(alpha: f64, beta: f64) -> Result<PlateauVerdict> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter { name: "beta", reason: format!("{beta} is negative") });
    }
    let nonzero = (beta < 1.0 && alpha > 0.0) || (beta == 1.0 && alpha > 2.0);
    Ok(if nonzero { PlateauVerdict::PlateauNonzero } else { PlateauVerdict::PlateauZero })
}

/// Closed-form coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SyntheticFamily {
    /// `b_n = n`
    Linear,
    /// `b_n = v`
    Constant { value: f64 },
    /// `b_n = n + (−1)^n c`
    StaggeredLinear { c: f64 },
    /// `b_n = m / ln m`, `m = n + offset`
    ParkerLog { offset: u32 },
    /// `b_n = (m / ln m)(1 + ρ/(2m) (1 − (−1)^n / ln m))`, `m = n + offset`, even offset
    SubleadingLog { rho: f64, offset: u32 },
    /// `b_1 = 1` and `Γ_n = α / n^β` exactly: `b_{n+1} = b_n e^{Γ_n/2}` for odd `n`, `b_{n+1} = b_n` otherwise
    PowerRate { alpha: f64, beta: f64 },
    /// `b_n = n` for `n < n_star`, then `b_odd = height`, `b_even = height · e^{γ/2}`
    LinearThenPlateau { n_star: usize, height: f64, gamma: f64 },
}

impl SyntheticFamily {
    fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        match *self {
            SyntheticFamily::Constant { value } if !(value > 0.0) => bad("value", format!("{value} is not positive")),
            SyntheticFamily::StaggeredLinear { c } if !(c > 0.0 && c < 1.0) => {
                bad("c", format!("{c} outside (0, 1)"))
            }
            SyntheticFamily::ParkerLog { offset } | SyntheticFamily::SubleadingLog { offset, .. } if offset < 2 => {
                bad("offset", format!("{offset} < 2 puts ln m at or below ln 2"))
            }
            SyntheticFamily::SubleadingLog { offset, .. } if offset % 2 == 1 => {
                bad("offset", format!("{offset} is odd"))
            }
            SyntheticFamily::SubleadingLog { rho, .. } if !rho.is_finite() => bad("rho", "not finite".into()),
            SyntheticFamily::PowerRate { beta, .. } if !(beta >= 0.0) => bad("beta", format!("{beta} is negative")),
            SyntheticFamily::LinearThenPlateau { n_star, height, .. } if n_star % 2 == 0 || !(height > 0.0) => {
                bad("n_star", format!("n_star = {n_star} must be odd and height = {height} positive"))
            }
            _ => Ok(()),
        }
    }
}

pub fn synthetic_bn(family: SyntheticFamily, n_max: usize) -> Result<Vec<f64>> {
    family.validate()?;
    if n_max < 4 {
        return Err(Error::InvalidParameter { name: "n_max", reason: format!("{n_max} < 4") });
    }
    let sign = |n: usize| if n % 2 == 0 { 1.0 } else { -1.0 };
    let b: Vec<f64> = match family {
        SyntheticFamily::Linear => (1..=n_max).map(|n| n as f64).collect(),
        SyntheticFamily::Constant { value } => vec![value; n_max],
        SyntheticFamily::StaggeredLinear { c } => (1..=n_max).map(|n| n as f64 + sign(n) * c).collect(),
        SyntheticFamily::ParkerLog { offset } => (1..=n_max)
            .map(|n| {
                let m = (n + offset as usize) as f64;
                m / m.ln()
            })
            .collect(),
        SyntheticFamily::SubleadingLog { rho, offset } => (1..=n_max)
            .map(|n| {
                let m = (n + offset as usize) as f64;
                let lm = m.ln();
                m / lm * (1.0 + rho / (2.0 * m) * (1.0 - sign(n) / lm))
            })
            .collect(),
        SyntheticFamily::PowerRate { alpha, beta } => {
            let mut out = Vec::with_capacity(n_max);
            let mut v = 1.0f64;
            for n in 1..=n_max {
                out.push(v);
                if n % 2 == 1 {
                    v *= (0.5 * alpha / (n as f64).powf(beta)).exp();
                }
            }
            out
        }
        SyntheticFamily::LinearThenPlateau { n_star, height, gamma } => (1..=n_max)
            .map(|n| match n {
                n if n < n_star => n as f64,
                n if n % 2 == 1 => height,
                _ => height * (0.5 * gamma).exp(),
            })
            .collect(),
    };
    if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveCoefficient { index: i + 1, value: *v });
    }
    Ok(b)
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Means over consecutive blocks of `width` samples (a trailing partial block is dropped).
pub fn coarse_grain(values: &[f64], width: usize) -> Vec<f64> {
    values.chunks_exact(width.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `Γ_n ≃ α / n^β` for odd `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFamily {
    pub alpha: f64,
    pub beta: f64,
}

/// `(n, −log P(n), S(n))` on odd `n ≤ n_max`, with `P(n) = Π_{n' odd ≤ n} e^{−Γ_{n'}}`
/// and `S(n) = 1 + Σ_{n' odd ≤ n} P(n')`.
pub fn product_and_partial_sums(family: AsymptoticFamily, n_max: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut ns = Vec::with_capacity(n_max / 2 + 1);
    let mut neg_log_p = Vec::with_capacity(n_max / 2 + 1);
    let mut sums = Vec::with_capacity(n_max / 2 + 1);
    let mut lp = Neumaier::default();
    let mut s = Neumaier::default();
    s.add(1.0);
    for n in (1..=n_max).step_by(2) {
        lp.add(family.alpha / (n as f64).powf(family.beta));
        s.add((-lp.value()).exp());
        ns.push(n);
        neg_log_p.push(lp.value());
        sums.push(s.value());
    }
    (ns, neg_log_p, sums)
}

/// Decides divergence of `Σ P(n)` from its partial sums: the sum exceeds
/// `1e6`, or the increment over the last decade did not shrink relative to
/// the decade before by at least `10^{0.05}`.
pub fn series_diverges(ns: &[usize], sums: &[f64]) -> bool {
    let n_max = *ns.last().unwrap();
    let at = |target: usize| sums[ns.partition_point(|&n| n <= target).saturating_sub(1)];
    let (s2, s1, s0) = (*sums.last().unwrap(), at(n_max / 10), at(n_max / 100));
    if s2 > 1e6 {
        return true;
    }
    let (last, prev) = (s2 - s1, s1 - s0);
    if prev <= 0.0 {
        return last > 0.0;
    }
    last / prev >= 10f64.powf(-0.05)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Regressor {
    /// `−log P` against `n^{1−β}`.
    Power { exponent: f64 },
    /// `−log P` against `ln n`.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub family: AsymptoticFamily,
    pub n_max: usize,
    pub regressor: Regressor,
    pub predicted_slope: f64,
    pub fitted_slope: f64,
    /// Relative, or absolute when the predicted slope is 0.
    pub slope_error: f64,
    /// `max/min − 1` of `n P(n)` over the last decade (β = 1 only).
    pub inverse_n_spread: Option<f64>,
    /// `(predicted, fitted)` slope of `S(n)` against `ln n` (α = 2, β = 1 only).
    pub partial_sum_log_slope: Option<(f64, f64)>,
    pub diverges: bool,
    pub verdict: PlateauVerdict,
    pub agrees: bool,
    pub warning: Option<String>,
}

/// Regresses `−log P(n)` over the final decade against the predicted form:
/// slope `α / (2(1 − β))` against `n^{1−β}` for `β ≠ 1` and `α / 2` against
/// `ln n` for `β = 1`.
pub fn asymptotic_regime_check(family: AsymptoticFamily, n_max: usize) -> Result<RegimeReport> {
    let AsymptoticFamily { alpha, beta } = family;
    let verdict = classify_convergence(alpha, beta)?;
    if n_max < 100 {
        return Err(Error::InvalidParameter { name: "n_max", reason: format!("{n_max} < 100") });
    }
    let warning = (n_max < 1000).then(|| format!("n_max = {n_max} is too small to discriminate regimes"));
    let (ns, nlp, sums) = product_and_partial_sums(family, n_max);
    let from = ns.partition_point(|&n| n < n_max / 10);
    let tail_n: Vec<f64> = ns[from..].iter().map(|&n| n as f64).collect();
    let tail_y = &nlp[from..];
    let (regressor, x, predicted) = if beta == 1.0 {
        (Regressor::Log, tail_n.iter().map(|n| n.ln()).collect::<Vec<_>>(), alpha / 2.0)
    } else {
        let e = 1.0 - beta;
        (Regressor::Power { exponent: e }, tail_n.iter().map(|n| n.powf(e)).collect(), alpha / (2.0 * e))
    };
    let (fitted, _) = linear_fit(&x, tail_y);
    let slope_error = if predicted == 0.0 { fitted.abs() } else { ((fitted - predicted) / predicted).abs() };
    let mut agrees = slope_error < REGIME_TOL;

    let mut inverse_n_spread = None;
    let mut partial_sum_log_slope = None;
    if beta == 1.0 {
        let np: Vec<f64> = tail_n.iter().zip(tail_y).map(|(n, l)| n * (-l).exp()).collect();
        let (lo, hi) = np.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        inverse_n_spread = Some(hi / lo - 1.0);
        if alpha == 2.0 {
            let k = np.iter().sum::<f64>() / np.len() as f64;
            let (fit, _) = linear_fit(&x, &sums[from..]);
            let pred = k / 2.0;
            agrees &= hi / lo - 1.0 < REGIME_TOL && ((fit - pred) / pred).abs() < REGIME_TOL;
            partial_sum_log_slope = Some((pred, fit));
        }
    }
    let diverges = series_diverges(&ns, &sums);
    Ok(RegimeReport {
        family,
        n_max,
        regressor,
        predicted_slope: predicted,
        fitted_slope: fitted,
        slope_error,
        inverse_n_spread,
        partial_sum_log_slope,
        diverges,
        verdict,
        agrees,
        warning,
    })
}

/// Plateau estimates from the crossover picture: a log-like head up to `n*`
/// plus a geometric tail with the fitted rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LGammaEstimate {
    pub n_star: usize,
    pub gamma_bar: f64,
    /// `1 + Σ_{n odd ≤ n*−2} P(n)`.
    pub head: f64,
    /// `P(n*−2) · Σ_j F_fit(j)`.
    pub tail: f64,
    /// `1 / (head + tail)`.
    pub two_piece: f64,
    /// `L Γ̄`.
    pub leading: f64,
    /// `1 / (ln L + Σ_n e^{−n Γ̄} / L)`.
    pub scaling_form: f64,
}

pub fn lgamma_estimate(b: &[f64], n_sites: usize, window: Option<Range<usize>>) -> Result<LGammaEstimate> {
    let n_star = detect_nstar(b)?;
    let r = rates(b)?;
    let cp = cumulative_product(&r, n_star)?;
    let fit = biexp_fit(&cp.values(), window)?;
    let mut head = 1.0;
    let mut log_p = 0.0;
    for n in (1..n_star).step_by(2) {
        log_p -= r.get(n).expect("odd n below n* has a rate");
        head += log_p.exp();
    }
    let tail_sum: f64 = fit
        .terms()
        .iter()
        .map(|&(a, c)| if c > 0.0 { a / (1.0 - (-c).exp()) } else { f64::INFINITY })
        .sum();
    let tail = log_p.exp() * tail_sum;
    let l = n_sites as f64;
    let g = fit.gamma_bar;
    let scaling_form = if g > 0.0 { 1.0 / (l.ln() + 1.0 / (l * (1.0 - (-g).exp()))) } else { 0.0 };
    Ok(LGammaEstimate {
        n_star,
        gamma_bar: g,
        head,
        tail,
        two_piece: 1.0 / (head + tail),
        leading: l * g,
        scaling_form,
    })
}

/// Everything derived from one coefficient sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisBundle {
    pub n_sites: usize,
    pub rates: RateSequence,
    pub n_star: usize,
    pub cumulative: CumulativeProduct,
    pub fit: Option<BiexpFit>,
    pub fit_error: Option<String>,
    pub collapse: Vec<(usize, f64)>,
    pub plateau: PlateauReadings,
    pub m: u32,
    pub d: u32,
}

pub fn analyze(b: &[f64], n_sites: usize, m: u32, d: u32, window: Option<Range<usize>>) -> Result<AnalysisBundle> {
    let rates = rates(b)?;
    let n_star = detect_nstar(b)?;
    let cumulative = cumulative_product(&rates, n_star)?;
    let (fit, fit_error) = match biexp_fit(&cumulative.values(), window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let collapse = collapse_curve(&cumulative.log_f, n_sites, m, d)?;
    let plateau = plateau_from_b(b)?;
    Ok(AnalysisBundle { n_sites, rates, n_star, cumulative, fit, fit_error, collapse, plateau, m, d })
}
