//! Pauli strings and sparse operator vectors.
//!
//! A [`PauliString`] on `L` sites is stored as two bit masks. Site `j`
//! carries `I, X, Y, Z` for `(x_j, z_j) = (0,0), (1,0), (1,1), (0,1)`, and the
//! string denotes the *Hermitian* tensor product of ordinary Pauli matrices.
//! With the fixed convention `Y = i·X·Z` this means
//!
//! ```text
//! P(x, z) = i^{|x & z|} · X^x · Z^z
//! ```
//!
//! from which the product rule follows:
//!
//! ```text
//! P(x1, z1) · P(x2, z2) = i^k · P(x1 ^ x2, z1 ^ z2),
//! k = |x1 & z1| + |x2 & z2| + 2·|z1 & x2| − |(x1^x2) & (z1^z2)|   (mod 4)
//! ```
//!
//! Normalized strings are orthonormal under `(A, B) = Tr(A†B) / 2^L`, so an
//! [`OperatorVector`] is simply a sparse coefficient map and a Hermitian
//! operator has purely real coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::par::{self, Exec};
use crate::{Error, Result};

pub const MAX_SITES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (u32, u32) {
        match self {
            Pauli::I => (0, 0),
            Pauli::X => (1, 0),
            Pauli::Y => (1, 1),
            Pauli::Z => (0, 1),
        }
    }

    fn from_bits(x: u32, z: u32) -> Pauli {
        match (x & 1, z & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_sites: u8,
    x: u32,
    z: u32,
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::UnsupportedSize { n_sites, min: 1, max: MAX_SITES });
    }
    Ok(())
}

fn low_mask(n_sites: usize) -> u32 {
    if n_sites >= 32 {
        u32::MAX
    } else {
        (1u32 << n_sites) - 1
    }
}

impl PauliString {
    pub fn new(n_sites: usize, x_mask: u32, z_mask: u32) -> Result<Self> {
        check_sites(n_sites)?;
        let m = low_mask(n_sites);
        if x_mask & !m != 0 || z_mask & !m != 0 {
            return Err(Error::InvalidParameter {
                name: "mask",
                reason: format!("bits set above site {}", n_sites - 1),
            });
        }
        Ok(PauliString { n_sites: n_sites as u8, x: x_mask, z: z_mask })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, 0, 0)
    }

    /// A string with the given single-site factors (0-based sites), identity elsewhere.
    pub fn from_ops(n_sites: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        check_sites(n_sites)?;
        let (mut x, mut z) = (0u32, 0u32);
        for &(site, p) in ops {
            if site >= n_sites {
                return Err(Error::SiteOutOfRange { site, n_sites });
            }
            let (px, pz) = p.bits();
            x = (x & !(1 << site)) | (px << site);
            z = (z & !(1 << site)) | (pz << site);
        }
        Self::new(n_sites, x, z)
    }

    pub fn single(n_sites: usize, site: usize, p: Pauli) -> Result<Self> {
        Self::from_ops(n_sites, &[(site, p)])
    }

    /// Parses either a dense label (`"XZIY"`, character `j` is site `j`) or a
    /// sparse one (`"X0 Z3"`, 0-based sites separated by whitespace).
    pub fn parse(n_sites: usize, label: &str) -> Result<Self> {
        let label = label.trim();
        let bad = || Error::InvalidLabel(label.to_string());
        if label.chars().all(|c| Pauli::from_char(c).is_some()) && !label.is_empty() {
            if label.chars().count() != n_sites {
                return Err(bad());
            }
            let ops: Vec<_> = label
                .chars()
                .enumerate()
                .map(|(j, c)| (j, Pauli::from_char(c).unwrap()))
                .collect();
            return Self::from_ops(n_sites, &ops);
        }
        let mut ops = Vec::new();
        for tok in label.split_whitespace() {
            let mut chars = tok.chars();
            let p = chars.next().and_then(Pauli::from_char).ok_or_else(bad)?;
            let site: usize = chars.as_str().parse().map_err(|_| bad())?;
            if ops.iter().any(|&(s, _)| s == site) {
                return Err(bad());
            }
            ops.push((site, p));
        }
        if ops.is_empty() {
            return Err(bad());
        }
        Self::from_ops(n_sites, &ops)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites as usize
    }

    pub fn x_mask(&self) -> u32 {
        self.x
    }

    pub fn z_mask(&self) -> u32 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn site(&self, j: usize) -> Pauli {
        Pauli::from_bits(self.x >> j, self.z >> j)
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Index into the `4^L` dense operator space: `x | z << L`.
    pub fn dense_index(&self) -> usize {
        (self.x as usize) | ((self.z as usize) << self.n_sites)
    }

    pub fn from_dense_index(n_sites: usize, index: usize) -> Result<Self> {
        let m = low_mask(n_sites) as usize;
        Self::new(n_sites, (index & m) as u32, ((index >> n_sites) & m) as u32)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::SizeMismatch {
                left: self.n_sites(),
                right: other.n_sites(),
            });
        }
        Ok(())
    }

    pub fn commutes_with(&self, other: &Self) -> Result<bool> {
        self.check_same(other)?;
        Ok(symplectic(self.x, self.z, other.x, other.z) == 0)
    }

    /// `self · other = i^k · result`.
    pub fn multiply(&self, other: &Self) -> Result<(PauliString, u8)> {
        self.check_same(other)?;
        let k = product_phase(self.x, self.z, other.x, other.z);
        Ok((
            PauliString { n_sites: self.n_sites, x: self.x ^ other.x, z: self.z ^ other.z },
            k,
        ))
    }

    /// `[self, other] = coefficient · string`, or `None` when they commute.
    pub fn commutator_term(&self, other: &Self) -> Result<Option<(PauliString, Complex64)>> {
        if self.commutes_with(other)? {
            return Ok(None);
        }
        let (r, k) = self.multiply(other)?;
        Ok(Some((r, 2.0 * i_pow(k))))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.n_sites() {
            write!(f, "{}", self.site(j).as_char())?;
        }
        Ok(())
    }
}

/// Parity of the symplectic form; 1 iff the strings anticommute.
#[inline]
pub(crate) fn symplectic(x1: u32, z1: u32, x2: u32, z2: u32) -> u32 {
    ((x1 & z2).count_ones() + (z1 & x2).count_ones()) & 1
}

#[inline]
pub(crate) fn product_phase(x1: u32, z1: u32, x2: u32, z2: u32) -> u8 {
    let k = (x1 & z1).count_ones() as i64 + (x2 & z2).count_ones() as i64
        + 2 * (z1 & x2).count_ones() as i64
        - ((x1 ^ x2) & (z1 ^ z2)).count_ones() as i64;
    k.rem_euclid(4) as u8
}

pub fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Sparse complex expansion of an operator in the Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorVector {
    n_sites: usize,
    entries: BTreeMap<PauliString, Complex64>,
    prune_threshold: f64,
}

/// Result of an explicit pruning pass.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PruneReport {
    pub threshold: f64,
    pub discarded_weight: f64,
    pub discarded_terms: usize,
}

impl OperatorVector {
    pub fn zero(n_sites: usize) -> Result<Self> {
        check_sites(n_sites)?;
        Ok(OperatorVector { n_sites, entries: BTreeMap::new(), prune_threshold: 0.0 })
    }

    pub fn from_terms<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut v = Self::zero(n_sites)?;
        for (p, c) in terms {
            v.add_term(p, c)?;
        }
        Ok(v)
    }

    pub fn from_real_terms<I>(n_sites: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        Self::from_terms(n_sites, terms.into_iter().map(|(p, c)| (p, Complex64::new(c, 0.0))))
    }

    pub fn single(p: PauliString) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(p, Complex64::new(1.0, 0.0));
        OperatorVector { n_sites: p.n_sites(), entries, prune_threshold: 0.0 }
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune_threshold = threshold.max(0.0);
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    /// Accumulates `c · p`; entries that cancel exactly are removed.
    pub fn add_term(&mut self, p: PauliString, c: Complex64) -> Result<()> {
        if p.n_sites() != self.n_sites {
            return Err(Error::SizeMismatch { left: self.n_sites, right: p.n_sites() });
        }
        if c == Complex64::new(0.0, 0.0) {
            return Ok(());
        }
        let slot = self.entries.entry(p).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
        if *slot == Complex64::new(0.0, 0.0) {
            self.entries.remove(&p);
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, p: &PauliString) -> Complex64 {
        self.entries.get(p).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.entries.iter()
    }

    pub fn identity_coefficient(&self) -> Complex64 {
        self.entries
            .iter()
            .next()
            .filter(|(p, _)| p.is_identity())
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn max_abs(&self) -> f64 {
        self.entries.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part relative to the largest coefficient.
    pub fn hermiticity_violation(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        self.entries.values().map(|c| c.im.abs()).fold(0.0, f64::max) / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_violation() <= tol
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs();
        scale == 0.0
            || self.entries.values().map(|c| c.re.abs()).fold(0.0, f64::max) / scale <= tol
    }

    pub fn dagger(&self) -> Self {
        let mut out = self.clone();
        out.entries.values_mut().for_each(|c| *c = c.conj());
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self { entries: BTreeMap::new(), ..self.clone() };
        if c != Complex64::new(0.0, 0.0) {
            for (p, v) in &self.entries {
                let w = v * c;
                if w != Complex64::new(0.0, 0.0) {
                    out.entries.insert(*p, w);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_pair(self, other)?;
        let mut out = self.clone();
        for (p, c) in &other.entries {
            out.add_term(*p, *c)?;
        }
        Ok(out)
    }

    /// Returns the unit vector and the prior norm; the zero vector signals
    /// Krylov termination.
    pub fn normalize(&self) -> Result<(Self, f64)> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Termination);
        }
        Ok((self.scale(Complex64::new(1.0 / n, 0.0)), n))
    }

    /// Drops entries with `|c| < threshold` and reports the discarded weight.
    pub fn prune(&self, threshold: f64) -> (Self, PruneReport) {
        let mut out = Self { entries: BTreeMap::new(), ..self.clone() };
        let mut report = PruneReport { threshold, ..Default::default() };
        for (p, c) in &self.entries {
            if c.norm() < threshold {
                report.discarded_weight += c.norm_sqr();
                report.discarded_terms += 1;
            } else {
                out.entries.insert(*p, *c);
            }
        }
        (out, report)
    }

    /// Prunes with the vector's own configured threshold (no-op at 0).
    pub fn prune_configured(&self) -> (Self, PruneReport) {
        self.prune(self.prune_threshold)
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_pair(self, other)?;
        let mut out = Self::zero(self.n_sites)?;
        for (p, a) in &self.entries {
            for (q, b) in &other.entries {
                let k = product_phase(p.x, p.z, q.x, q.z);
                let r = PauliString { n_sites: p.n_sites, x: p.x ^ q.x, z: p.z ^ q.z };
                out.add_term(r, a * b * i_pow(k))?;
            }
        }
        Ok(out)
    }
}

fn check_pair(a: &OperatorVector, b: &OperatorVector) -> Result<()> {
    if a.n_sites != b.n_sites {
        return Err(Error::SizeMismatch { left: a.n_sites, right: b.n_sites });
    }
    Ok(())
}

/// `Σ_P conj(a[P]) · b[P] = Tr(a† b) / 2^L`.
pub fn inner_product(a: &OperatorVector, b: &OperatorVector) -> Result<Complex64> {
    check_pair(a, b)?;
    let (small, large, flip) = if a.len() <= b.len() { (a, b, false) } else { (b, a, true) };
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, c) in &small.entries {
        if let Some(d) = large.entries.get(p) {
            acc += if flip { d.conj() * c } else { c.conj() * d };
        }
    }
    Ok(acc)
}

/// Relative tolerance used by the Hermiticity guard on `H`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Chunk of `a`'s entries handled by one worker in [`apply_liouvillian`].
const LIOUVILLIAN_CHUNK: usize = 256;

/// `[H, A]` accumulated over all key pairs.
///
/// Contributions are generated in (A-entry, H-entry) order and merged in that
/// order, so the result does not depend on the number of workers.
pub fn apply_liouvillian(h: &OperatorVector, a: &OperatorVector) -> Result<OperatorVector> {
    apply_liouvillian_with(Exec::default(), h, a)
}

pub fn apply_liouvillian_with(
    exec: Exec,
    h: &OperatorVector,
    a: &OperatorVector,
) -> Result<OperatorVector> {
    check_pair(h, a)?;
    let violation = h.hermiticity_violation();
    if violation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { violation });
    }
    let h_terms: Vec<(PauliString, Complex64)> = h.entries.iter().map(|(p, c)| (*p, *c)).collect();
    let a_terms: Vec<(PauliString, Complex64)> = a.entries.iter().map(|(p, c)| (*p, *c)).collect();
    let n_chunks = a_terms.len().div_ceil(LIOUVILLIAN_CHUNK);
    let parts = par::map_chunks(exec, n_chunks, |c| {
        let lo = c * LIOUVILLIAN_CHUNK;
        let hi = (lo + LIOUVILLIAN_CHUNK).min(a_terms.len());
        let mut out = Vec::new();
        for (q, ca) in &a_terms[lo..hi] {
            for (t, ch) in &h_terms {
                if symplectic(t.x, t.z, q.x, q.z) == 1 {
                    let k = product_phase(t.x, t.z, q.x, q.z);
                    let r = PauliString { n_sites: q.n_sites, x: t.x ^ q.x, z: t.z ^ q.z };
                    out.push((r, ch * ca * 2.0 * i_pow(k)));
                }
            }
        }
        out
    });
    let mut result = OperatorVector::zero(a.n_sites)?.with_prune_threshold(a.prune_threshold);
    for part in parts {
        for (r, c) in part {
            *result.entries.entry(r).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
    }
    result.entries.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_site_products() {
        let x = PauliString::single(1, 0, Pauli::X).unwrap();
        let z = PauliString::single(1, 0, Pauli::Z).unwrap();
        let y = PauliString::single(1, 0, Pauli::Y).unwrap();
        assert_eq!(x.multiply(&x).unwrap(), (PauliString::identity(1).unwrap(), 0));
        assert_eq!(x.multiply(&z).unwrap(), (y, 3));
        assert_eq!(z.multiply(&x).unwrap(), (y, 1));
        assert_eq!(y.multiply(&y).unwrap().1, 0);
    }

    #[test]
    fn commutator_examples() {
        let x = PauliString::single(1, 0, Pauli::X).unwrap();
        let z = PauliString::single(1, 0, Pauli::Z).unwrap();
        let y = PauliString::single(1, 0, Pauli::Y).unwrap();
        assert_eq!(x.commutator_term(&x).unwrap(), None);
        assert_eq!(x.commutator_term(&z).unwrap(), Some((y, c(0.0, -2.0))));

        let z0 = PauliString::parse(2, "Z0").unwrap();
        let xx = PauliString::parse(2, "XX").unwrap();
        let yx = PauliString::parse(2, "YX").unwrap();
        assert_eq!(z0.commutator_term(&xx).unwrap(), Some((yx, c(0.0, 2.0))));
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = PauliString::parse(2, "XZ").unwrap();
        let b = PauliString::parse(3, "XZI").unwrap();
        assert!(matches!(a.multiply(&b), Err(Error::SizeMismatch { .. })));
        assert!(a.commutator_term(&b).is_err());
        let va = OperatorVector::single(a);
        let vb = OperatorVector::single(b);
        assert!(inner_product(&va, &vb).is_err());
        assert!(apply_liouvillian(&va, &vb).is_err());
        assert!(va.add(&vb).is_err());
    }

    #[test]
    fn parse_and_display() {
        let p = PauliString::parse(4, "X0 Z3").unwrap();
        assert_eq!(p.to_string(), "XIIZ");
        assert_eq!(PauliString::parse(4, "XIIZ").unwrap(), p);
        assert!(PauliString::parse(4, "X4").is_err());
        assert!(PauliString::parse(4, "XIZ").is_err());
        assert!(PauliString::parse(4, "Q1").is_err());
        assert!(PauliString::new(2, 0b100, 0).is_err());
        assert!(PauliString::identity(33).is_err());
        let q = PauliString::from_dense_index(4, p.dense_index()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn inner_product_examples() {
        let x = OperatorVector::single(PauliString::parse(2, "XI").unwrap());
        let z = OperatorVector::single(PauliString::parse(2, "ZI").unwrap());
        assert_eq!(inner_product(&x, &x).unwrap(), c(1.0, 0.0));
        assert_eq!(inner_product(&x, &z).unwrap(), c(0.0, 0.0));
        let mix = x.scale(c(0.6, 0.0)).add(&z.scale(c(0.8, 0.0))).unwrap();
        assert!((inner_product(&mix, &mix).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn liouvillian_small_examples() {
        let x = OperatorVector::single(PauliString::parse(1, "X").unwrap());
        assert!(apply_liouvillian(&x, &x).unwrap().is_empty());

        let hx = 0.7;
        let h = x.scale(c(hx, 0.0));
        let z = OperatorVector::single(PauliString::parse(1, "Z").unwrap());
        let out = apply_liouvillian(&h, &z).unwrap();
        let y = PauliString::parse(1, "Y").unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.get(&y) - c(0.0, -2.0 * hx)).norm() < 1e-15);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let h = OperatorVector::from_terms(1, [(PauliString::parse(1, "Z").unwrap(), c(0.0, 1.0))])
            .unwrap();
        let a = OperatorVector::single(PauliString::parse(1, "X").unwrap());
        assert!(matches!(apply_liouvillian(&h, &a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn normalize_and_prune() {
        let x = OperatorVector::single(PauliString::parse(1, "X").unwrap());
        let (u, n) = x.scale(c(2.0, 0.0)).normalize().unwrap();
        assert_eq!(n, 2.0);
        assert_eq!(u, x);
        let cancel = x.add(&x.scale(c(-1.0, 0.0))).unwrap();
        assert!(cancel.is_empty());
        assert_eq!(cancel.normalize(), Err(Error::Termination));

        let z = OperatorVector::single(PauliString::parse(1, "Z").unwrap());
        let v = x.scale(c(0.5, 0.0)).add(&z.scale(c(1e-14, 0.0))).unwrap();
        let (kept, rep) = v.prune(1e-12);
        assert_eq!(kept, x.scale(c(0.5, 0.0)));
        assert!((rep.discarded_weight - 1e-28).abs() < 1e-40);
        assert_eq!(rep.discarded_terms, 1);
    }

    #[test]
    fn operator_product_squares_to_identity() {
        let p = OperatorVector::single(PauliString::parse(3, "XYZ").unwrap());
        let sq = p.mul(&p).unwrap();
        assert_eq!(sq.len(), 1);
        assert_eq!(sq.identity_coefficient(), c(1.0, 0.0));
    }
}
