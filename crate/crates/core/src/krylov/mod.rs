//! Lanczos engines on the operator space.
//!
//! [`lanczos_sa`] keeps three vectors and runs the bare three-term recurrence;
//! [`lanczos_fo`] stores the whole basis and Gram–Schmidt orthogonalizes each
//! new vector against it. Both work in the real-reduced dense representation
//! described in [`liouvillian`].

mod basis;
pub mod liouvillian;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use basis::{orthogonality_report, KrylovBasis, OrthogonalityReport};
pub use liouvillian::{from_dense_real, to_dense_real, DenseLiouvillian, MAX_DENSE_SITES};

use crate::dd::Dd;
use crate::hamiltonians::{ObservableSpec, SpinChainModel};
use crate::par::{self, Exec};
use crate::pauli::PruneReport;
use crate::{Error, Result};

/// Relative size below which a new `b_n` counts as Krylov exhaustion.
pub const TERMINATION_RTOL: f64 = 1e-12;
pub const DEFAULT_ORTHO_TOL: f64 = 1e-10;
/// SA keeps every `k`-th Krylov vector to estimate its loss of orthogonality.
pub const DEFAULT_DRIFT_STRIDE: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    SA,
    FO,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::SA => "SA",
            Method::FO => "FO",
        })
    }
}

/// Working precision of the FO engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Double,
    /// Basis and Gram–Schmidt in double-double arithmetic, about 32 digits.
    /// Rounding noise outside the Krylov space grows geometrically with `n`,
    /// so runs meant to reach exhaustion need the extra headroom for the
    /// vanishing `b_n` to fall below the termination threshold.
    DoubleDouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    pub n_max: usize,
    pub exec: Exec,
    pub ortho_tol: f64,
    /// Entries with modulus below this are zeroed after each step (0 = exact).
    pub prune_threshold: f64,
    /// Bytes of basis values kept in RAM (FO).
    pub memory_budget: Option<usize>,
    pub spill_dir: Option<PathBuf>,
    /// 0 disables the SA drift estimate.
    pub drift_stride: usize,
    /// FO only.
    pub precision: Precision,
}

impl LanczosOptions {
    pub fn new(n_max: usize) -> Self {
        LanczosOptions {
            n_max,
            exec: Exec::default(),
            ortho_tol: DEFAULT_ORTHO_TOL,
            prune_threshold: 0.0,
            memory_budget: None,
            spill_dir: None,
            drift_stride: DEFAULT_DRIFT_STRIDE,
            precision: Precision::Double,
        }
    }

    pub fn precision(mut self, p: Precision) -> Self {
        self.precision = p;
        self
    }

    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn ortho_tol(mut self, tol: f64) -> Self {
        self.ortho_tol = tol;
        self
    }

    pub fn prune_threshold(mut self, thr: f64) -> Self {
        self.prune_threshold = thr;
        self
    }

    pub fn memory_budget(mut self, bytes: Option<usize>) -> Self {
        self.memory_budget = bytes;
        self
    }

    pub fn spill_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.spill_dir = dir;
        self
    }

    pub fn drift_stride(mut self, k: usize) -> Self {
        self.drift_stride = k;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::InvalidParameter { name: "n_max", reason: "must be at least 1".into() });
        }
        if !(self.ortho_tol > 0.0) {
            return Err(Error::InvalidParameter { name: "ortho_tol", reason: format!("{} is not positive", self.ortho_tol) });
        }
        if !(self.prune_threshold >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "prune_threshold",
                reason: format!("{} is negative", self.prune_threshold),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanczosResult {
    /// `b_1, b_2, ...`
    pub b: Vec<f64>,
    pub method: Method,
    /// Step `n` whose residual vanished, if the Krylov space closed.
    pub terminated: Option<usize>,
    /// FO ran out of memory budget before `n_max`.
    pub partial: bool,
    /// One value per `b_n`.
    pub orthogonality_drift: Vec<f64>,
    pub seed_label: String,
    pub model_label: String,
    pub n_sites: usize,
    pub prune: PruneReport,
    /// FO steps that needed a second Gram–Schmidt pass.
    pub second_passes: usize,
}

impl LanczosResult {
    fn empty(method: Method, model: &SpinChainModel, obs: &ObservableSpec, thr: f64) -> Self {
        LanczosResult {
            b: Vec::new(),
            method,
            terminated: None,
            partial: false,
            orthogonality_drift: Vec::new(),
            seed_label: obs.label.clone(),
            model_label: model.label.clone(),
            n_sites: model.n_sites,
            prune: PruneReport { threshold: thr, ..Default::default() },
            second_passes: 0,
        }
    }

    pub fn max_drift(&self) -> f64 {
        self.orthogonality_drift.iter().copied().fold(0.0, f64::max)
    }
}

struct Setup {
    liou: DenseLiouvillian,
    seed: Vec<f64>,
    /// `Y`-count parity of `R_0` when the recurrence alternates between sectors.
    sector0: Option<u32>,
}

impl Setup {
    fn sector(&self, n: usize) -> Option<u32> {
        self.sector0.map(|p| p ^ (n as u32 & 1))
    }
}

fn y_parity(n_sites: usize, k: usize) -> u32 {
    let mask = (1usize << n_sites) - 1;
    ((k & mask) & (k >> n_sites)).count_ones() & 1
}

fn setup(model: &SpinChainModel, obs: &ObservableSpec, opts: &LanczosOptions) -> Result<Setup> {
    opts.validate()?;
    if obs.n_sites() != model.n_sites {
        return Err(Error::SizeMismatch { left: model.n_sites, right: obs.n_sites() });
    }
    let liou = DenseLiouvillian::new(model, opts.exec)?;
    let seed = to_dense_real(&obs.seed)?;
    let mut parities = seed
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, _)| y_parity(model.n_sites, k));
    let first = parities.next();
    let sector0 = match first {
        Some(p) if liou.flips_y_parity() && parities.all(|q| q == p) => Some(p),
        _ => None,
    };
    Ok(Setup { liou, seed, sector0 })
}

fn prune_dense(v: &mut [f64], thr: f64, report: &mut PruneReport) {
    if thr <= 0.0 {
        return;
    }
    for x in v.iter_mut() {
        if *x != 0.0 && x.abs() < thr {
            report.discarded_weight += *x * *x;
            report.discarded_terms += 1;
            *x = 0.0;
        }
    }
}

fn termination_scale(b: &[f64], liou: &DenseLiouvillian) -> f64 {
    b.iter().copied().fold(0.0, f64::max).max(if b.is_empty() { liou.norm_bound() } else { 0.0 })
}

/// Three-term recurrence `R'_n = S R_{n−1} + b_{n−1} R_{n−2}` storing only
/// three vectors, plus every `drift_stride`-th vector for the drift estimate.
pub fn lanczos_sa(model: &SpinChainModel, obs: &ObservableSpec, opts: &LanczosOptions) -> Result<LanczosResult> {
    let setup = setup(model, obs, opts)?;
    let (liou, seed) = (&setup.liou, setup.seed.clone());
    let exec = opts.exec;
    let mut res = LanczosResult::empty(Method::SA, model, obs, opts.prune_threshold);
    let mut retained = KrylovBasis::new(model.n_sites);
    if opts.drift_stride > 0 {
        let s = retained.intern(&seed);
        retained.push(&seed, s)?;
    }
    let dim = seed.len();
    let mut prev = vec![0.0; dim];
    let mut cur = seed;
    let mut next = vec![0.0; dim];
    for n in 1..=opts.n_max {
        let b_prev = res.b.last().copied().unwrap_or(0.0);
        liou.apply_sector(&cur, b_prev, Some(&prev), &mut next, setup.sector(n));
        prune_dense(&mut next, opts.prune_threshold, &mut res.prune);
        let bn = par::norm_sqr(exec, &next).sqrt();
        if bn <= TERMINATION_RTOL * termination_scale(&res.b, liou) {
            res.terminated = Some(n);
            break;
        }
        par::scale(exec, 1.0 / bn, &mut next);
        res.b.push(bn);
        let drift = if opts.drift_stride > 0 {
            let s = retained.intern(&next);
            let d = retained.dots(exec, &next, &s)?;
            if n % opts.drift_stride == 0 {
                retained.push(&next, s)?;
            }
            d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        } else {
            0.0
        };
        res.orthogonality_drift.push(drift);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(res)
}

/// Lanczos with classical Gram–Schmidt against the full stored basis.
///
/// After one pass the overlaps are measured again; a second pass runs when
/// the residual norm fell by more than a factor 10 or an overlap reached
/// `ortho_tol`. The recorded drift is the overlap measured after correction.
pub fn lanczos_fo(
    model: &SpinChainModel,
    obs: &ObservableSpec,
    opts: &LanczosOptions,
) -> Result<(LanczosResult, KrylovBasis)> {
    let setup = setup(model, obs, opts)?;
    let (liou, seed) = (&setup.liou, setup.seed.clone());
    let exec = opts.exec;
    let mut res = LanczosResult::empty(Method::FO, model, obs, opts.prune_threshold);
    let mut basis = KrylovBasis::new(model.n_sites).with_memory_budget(opts.memory_budget);
    if let Some(dir) = &opts.spill_dir {
        basis = basis.with_spill_dir(dir)?;
    }
    let s = basis.intern(&seed);
    if !basis.push(&seed, s)? {
        res.partial = true;
        return Ok((res, basis));
    }
    if opts.precision == Precision::DoubleDouble {
        fo_double_double(&setup, opts, &mut res, &mut basis)?;
        return Ok((res, basis));
    }
    let dim = seed.len();
    let mut prev = vec![0.0; dim];
    let mut cur = seed;
    let mut next = vec![0.0; dim];
    let max_abs = |d: &[f64]| d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for n in 1..=opts.n_max {
        let b_prev = res.b.last().copied().unwrap_or(0.0);
        liou.apply_sector(&cur, b_prev, Some(&prev), &mut next, setup.sector(n));
        prune_dense(&mut next, opts.prune_threshold, &mut res.prune);
        let thresh = TERMINATION_RTOL * termination_scale(&res.b, liou);
        let norm0 = par::norm_sqr(exec, &next).sqrt();
        if norm0 <= thresh {
            res.terminated = Some(n);
            break;
        }

        let s = basis.intern(&next);
        let d = basis.dots(exec, &next, &s)?;
        basis.subtract(exec, &d, &mut next)?;
        let mut norm = par::norm_sqr(exec, &next).sqrt();
        if norm <= thresh {
            res.terminated = Some(n);
            break;
        }
        let mut s = basis.intern(&next);
        let mut m = basis.dots(exec, &next, &s)?;
        if norm < norm0 / 10.0 || max_abs(&m) / norm >= opts.ortho_tol {
            basis.subtract(exec, &m, &mut next)?;
            norm = par::norm_sqr(exec, &next).sqrt();
            if norm <= thresh {
                res.terminated = Some(n);
                break;
            }
            s = basis.intern(&next);
            m = basis.dots(exec, &next, &s)?;
            res.second_passes += 1;
        }
        let drift = max_abs(&m) / norm;

        par::scale(exec, 1.0 / norm, &mut next);
        res.b.push(norm);
        res.orthogonality_drift.push(drift);
        if !basis.push(&next, s)? {
            res.partial = true;
            break;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok((res, basis))
}

/// FO with the basis held in double-double. Two Gram–Schmidt passes always
/// run; the stored [`KrylovBasis`] receives the vectors rounded to `f64`.
fn fo_double_double(setup: &Setup, opts: &LanczosOptions, res: &mut LanczosResult, basis: &mut KrylovBasis) -> Result<()> {
    let liou = &setup.liou;
    let dim = setup.seed.len();
    let bytes_per_vector = dim * std::mem::size_of::<Dd>();
    let mut exact: Vec<Vec<Dd>> = vec![setup.seed.iter().map(|&x| Dd::new(x)).collect()];
    let mut w = vec![Dd::ZERO; dim];
    let dot = |a: &[Dd], b: &[Dd]| a.iter().zip(b).fold(Dd::ZERO, |acc, (x, y)| acc + *x * *y);
    for n in 1..=opts.n_max {
        liou.apply_dd(exact.last().expect("seed is stored"), &mut w, setup.sector(n));
        for _ in 0..2 {
            let d: Vec<Dd> = exact.iter().map(|u| dot(u, &w)).collect();
            for (u, c) in exact.iter().zip(&d) {
                if c.hi != 0.0 {
                    for (wi, ui) in w.iter_mut().zip(u) {
                        *wi = *wi - *c * *ui;
                    }
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm.to_f64() <= TERMINATION_RTOL * termination_scale(&res.b, liou) {
            res.terminated = Some(n);
            break;
        }
        let drift = exact.iter().map(|u| (dot(u, &w) / norm).abs().to_f64()).fold(0.0, f64::max);
        let v: Vec<Dd> = w.iter().map(|x| *x / norm).collect();
        let rounded: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();
        res.b.push(norm.to_f64());
        res.orthogonality_drift.push(drift);
        let over_budget = opts.memory_budget.is_some_and(|cap| (exact.len() + 1) * bytes_per_vector > cap);
        let s = basis.intern(&rounded);
        if over_budget || !basis.push(&rounded, s)? {
            res.partial = true;
            break;
        }
        exact.push(v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_ising, Boundary, NamedObservable};
    use crate::pauli::{Pauli, PauliString};

    fn single_spin(h: f64) -> SpinChainModel {
        let z = PauliString::single(1, 0, Pauli::Z).unwrap();
        SpinChainModel::new(1, Boundary::Open, vec![(z, h)], "spin").unwrap()
    }

    fn sigma(p: Pauli) -> ObservableSpec {
        crate::hamiltonians::site_observable(1, 0, p).unwrap()
    }

    #[test]
    fn single_spin_closes_after_one_coefficient() {
        let h = 0.7;
        let opts = LanczosOptions::new(10);
        let sa = lanczos_sa(&single_spin(h), &sigma(Pauli::X), &opts).unwrap();
        let (fo, basis) = lanczos_fo(&single_spin(h), &sigma(Pauli::X), &opts).unwrap();
        assert_eq!(sa.b.len(), 1);
        assert!((sa.b[0] - 2.0 * h).abs() < 1e-15);
        assert_eq!(sa.terminated, Some(2));
        assert_eq!(sa.b, fo.b);
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn commuting_seed_gives_empty_sequence() {
        let opts = LanczosOptions::new(10);
        let sa = lanczos_sa(&single_spin(1.0), &sigma(Pauli::Z), &opts).unwrap();
        assert!(sa.b.is_empty());
        assert_eq!(sa.terminated, Some(1));
    }

    #[test]
    fn fo_basis_is_orthonormal_and_matches_sa_early() {
        let model = build_ising(1.0, 1.0, 1.5, 5, Boundary::Periodic).unwrap();
        let obs = NamedObservable::SigmaZ1.build(5).unwrap();
        let opts = LanczosOptions::new(60).exec(Exec::Sequential);
        let sa = lanczos_sa(&model, &obs, &opts).unwrap();
        let (fo, mut basis) = lanczos_fo(&model, &obs, &opts).unwrap();
        for n in 0..20 {
            assert!((sa.b[n] - fo.b[n]).abs() < 1e-10 * fo.b[n]);
        }
        assert!(fo.max_drift() < DEFAULT_ORTHO_TOL);
        let rep = orthogonality_report(&mut basis).unwrap();
        assert!(rep.max < 1e-10 && rep.max_norm_deviation < 1e-12);
    }

    #[test]
    fn spill_round_trip_and_budget() {
        let model = build_ising(1.0, 1.0, 1.5, 4, Boundary::Open).unwrap();
        let obs = NamedObservable::SigmaZ1.build(4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let plain = lanczos_fo(&model, &obs, &LanczosOptions::new(40)).unwrap().0;
        let opts = LanczosOptions::new(40)
            .memory_budget(Some(4096))
            .spill_dir(Some(dir.path().to_path_buf()));
        let (spilled, basis) = lanczos_fo(&model, &obs, &opts).unwrap();
        assert!(basis.spilled_vectors() > 0);
        assert_eq!(plain.b, spilled.b);
        basis.verify_checksums().unwrap();

        let tight = LanczosOptions::new(40).memory_budget(Some(4096));
        let (partial, _) = lanczos_fo(&model, &obs, &tight).unwrap();
        assert!(partial.partial && partial.b.len() < plain.b.len());
    }

    #[test]
    fn double_double_reaches_exhaustion_on_degenerate_spectrum() {
        // Translation-symmetric L = 3 ring: the Krylov space of σ^z_1 has
        // dimension 31, but in f64 the noise outside it outgrows 1e-12.
        let model = build_ising(1.0, 1.0, 1.5, 3, Boundary::Periodic).unwrap();
        let obs = NamedObservable::SigmaZ1.build(3).unwrap();
        let opts = LanczosOptions::new(64);
        let (plain, _) = lanczos_fo(&model, &obs, &opts).unwrap();
        let (dd, mut basis) = lanczos_fo(&model, &obs, &opts.clone().precision(Precision::DoubleDouble)).unwrap();
        assert_eq!(dd.terminated, Some(31));
        assert_eq!(dd.b.len(), 30);
        assert!(plain.b.len() > 30);
        for (x, y) in dd.b.iter().zip(&plain.b) {
            assert!((x - y).abs() < 1e-9 * x);
        }
        assert!(dd.max_drift() < 1e-25);
        assert!(orthogonality_report(&mut basis).unwrap().max < 1e-15);
    }

    #[test]
    fn basis_operators_follow_phase_convention() {
        let model = build_ising(1.0, 0.5, 0.8, 3, Boundary::Open).unwrap();
        let obs = NamedObservable::SigmaZ1.build(3).unwrap();
        let (_, basis) = lanczos_fo(&model, &obs, &LanczosOptions::new(5)).unwrap();
        assert_eq!(basis.operator(0).unwrap(), obs.seed);
        assert!(basis.operator(1).unwrap().is_anti_hermitian(1e-14));
        assert!(basis.operator(2).unwrap().is_hermitian(1e-14));
    }
}
