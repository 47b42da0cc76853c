//! Real-reduced Liouvillian on the dense `4^L` Pauli index space.
//!
//! For Hermitian `H` and a Hermitian seed, the Krylov operators satisfy
//! `O_n = i^n R_n` with real coefficient vectors `R_n` in the Hermitian Pauli
//! basis. The recurrence then only needs the real antisymmetric map
//! `S = −i[H, ·]`: for an anticommuting pair `[t, q] = 2 i^k r` with `k` odd,
//! so `S` contributes `±2 h_t` to `r`.

use crate::dd::Dd;
use crate::hamiltonians::SpinChainModel;
use crate::par::{self, Exec};
use crate::pauli::{product_phase, symplectic, OperatorVector, PauliString};
use crate::{Error, Result};

/// Largest chain handled by the dense engines (`4^14` coefficients per vector).
pub const MAX_DENSE_SITES: usize = 14;

const APPLY_CHUNK: usize = 1 << 12;

/// Largest term support whose coefficients are tabulated (`4^4` entries).
const MAX_TABLE_SITES: usize = 4;

/// One Hamiltonian string. The coefficient of `S` from input `k ^ key` to
/// output `k` depends only on the bits of `k` on the support, so it is read
/// from a table indexed by those bits.
#[derive(Debug, Clone)]
struct Term {
    key: usize,
    x: u32,
    z: u32,
    /// `2 h_t`
    coeff: f64,
    sites: Vec<u32>,
    table: Vec<f64>,
}

impl Term {
    fn new(p: &PauliString, h: f64) -> Self {
        let (x, z) = (p.x_mask(), p.z_mask());
        let sites: Vec<u32> = (0..32).filter(|s| (x | z) >> s & 1 == 1).collect();
        let coeff = 2.0 * h;
        let mut table = Vec::new();
        if sites.len() <= MAX_TABLE_SITES {
            table = (0..1usize << (2 * sites.len()))
                .map(|local| {
                    let (mut kx, mut kz) = (0u32, 0u32);
                    for (m, s) in sites.iter().enumerate() {
                        kx |= ((local >> (2 * m)) as u32 & 1) << s;
                        kz |= ((local >> (2 * m + 1)) as u32 & 1) << s;
                    }
                    coefficient(x, z, kx ^ x, kz ^ z, coeff)
                })
                .collect();
        }
        Term { key: p.dense_index(), x, z, coeff, sites, table }
    }

    #[inline]
    fn at(&self, kx: u32, kz: u32) -> f64 {
        if self.table.is_empty() {
            return coefficient(self.x, self.z, kx ^ self.x, kz ^ self.z, self.coeff);
        }
        let mut local = 0usize;
        for (m, &s) in self.sites.iter().enumerate() {
            local |= ((((kx >> s) & 1) | (((kz >> s) & 1) << 1)) as usize) << (2 * m);
        }
        self.table[local]
    }
}

/// Coefficient of `−i[t, q]` on the string `t·q`.
fn coefficient(tx: u32, tz: u32, qx: u32, qz: u32, coeff: f64) -> f64 {
    if symplectic(tx, tz, qx, qz) == 0 {
        return 0.0;
    }
    // Anticommuting pairs have odd phase k: −i · 2 i^k = +2 (k=1) or −2 (k=3).
    if product_phase(tx, tz, qx, qz) == 1 {
        coeff
    } else {
        -coeff
    }
}

#[derive(Debug, Clone)]
pub struct DenseLiouvillian {
    n_sites: usize,
    terms: Vec<Term>,
    exec: Exec,
}

impl DenseLiouvillian {
    pub fn new(model: &SpinChainModel, exec: Exec) -> Result<Self> {
        Self::from_operator(&model.operator(), exec)
    }

    pub fn from_operator(h: &OperatorVector, exec: Exec) -> Result<Self> {
        let n_sites = h.n_sites();
        if n_sites > MAX_DENSE_SITES {
            return Err(Error::UnsupportedSize { n_sites, min: 1, max: MAX_DENSE_SITES });
        }
        let violation = h.hermiticity_violation();
        if violation > crate::pauli::HERMITIAN_TOL {
            return Err(Error::NotHermitian { violation });
        }
        let terms = h
            .iter()
            .filter(|(p, _)| !p.is_identity())
            .map(|(p, c)| Term::new(p, c.re))
            .collect();
        Ok(DenseLiouvillian { n_sites, terms, exec })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1usize << (2 * self.n_sites)
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Upper bound on the operator norm of `S`: `2 Σ |h_t|`.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum::<f64>()
    }

    /// True when every term has an even number of `Y` factors. `S` then maps
    /// strings of even `Y` count to odd ones and back.
    pub fn flips_y_parity(&self) -> bool {
        self.terms.iter().all(|t| (t.x & t.z).count_ones() % 2 == 0)
    }

    /// `out = S · input + beta · prev`.
    pub fn apply_into(&self, input: &[f64], beta: f64, prev: Option<&[f64]>, out: &mut [f64]) {
        self.apply_sector(input, beta, prev, out, None);
    }

    /// As [`apply_into`](Self::apply_into), but with `Some(p)` only outputs
    /// whose `Y` count has parity `p` are evaluated; the rest are set to 0.
    /// Callers must know the other entries vanish.
    pub fn apply_sector(&self, input: &[f64], beta: f64, prev: Option<&[f64]>, out: &mut [f64], sector: Option<u32>) {
        let dim = self.dim();
        assert_eq!(input.len(), dim);
        assert_eq!(out.len(), dim);
        let n = self.n_sites;
        let mask = (1usize << n) - 1;
        let terms = &self.terms;
        par::for_each_chunk_mut(self.exec, out, APPLY_CHUNK, |c, chunk| {
            let base = c * APPLY_CHUNK;
            for (off, slot) in chunk.iter_mut().enumerate() {
                let k = base + off;
                let kx = (k & mask) as u32;
                let kz = (k >> n) as u32;
                if let Some(p) = sector {
                    if (kx & kz).count_ones() & 1 != p {
                        *slot = 0.0;
                        continue;
                    }
                }
                let mut acc = 0.0;
                for t in terms {
                    acc += t.at(kx, kz) * input[k ^ t.key];
                }
                if let Some(p) = prev {
                    acc += beta * p[k];
                }
                *slot = acc;
            }
        });
    }

    /// `out = S · input` in double-double arithmetic, with the same sector rule.
    pub(crate) fn apply_dd(&self, input: &[Dd], out: &mut [Dd], sector: Option<u32>) {
        let n = self.n_sites;
        let mask = (1usize << n) - 1;
        let terms = &self.terms;
        par::for_each_chunk_mut(self.exec, out, APPLY_CHUNK, |c, chunk| {
            let base = c * APPLY_CHUNK;
            for (off, slot) in chunk.iter_mut().enumerate() {
                let k = base + off;
                let kx = (k & mask) as u32;
                let kz = (k >> n) as u32;
                *slot = Dd::ZERO;
                if sector.is_some_and(|p| (kx & kz).count_ones() & 1 != p) {
                    continue;
                }
                for t in terms {
                    let c = t.at(kx, kz);
                    if c != 0.0 {
                        *slot += input[k ^ t.key].mul_f64(c);
                    }
                }
            }
        });
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(input, 0.0, None, &mut out);
        out
    }
}

/// Real coefficient vector of a Hermitian operator on the dense index space.
pub fn to_dense_real(op: &OperatorVector) -> Result<Vec<f64>> {
    let n_sites = op.n_sites();
    if n_sites > MAX_DENSE_SITES {
        return Err(Error::UnsupportedSize { n_sites, min: 1, max: MAX_DENSE_SITES });
    }
    let violation = op.hermiticity_violation();
    if violation > crate::pauli::HERMITIAN_TOL {
        return Err(Error::NotHermitian { violation });
    }
    let mut out = vec![0.0; 1usize << (2 * n_sites)];
    for (p, c) in op.iter() {
        out[p.dense_index()] = c.re;
    }
    Ok(out)
}

/// Inverse of the real reduction for the `step`-th Krylov vector: `O_n = i^n R_n`.
pub fn from_dense_real(n_sites: usize, step: usize, values: &[f64]) -> Result<OperatorVector> {
    let phase = crate::pauli::i_pow((step % 4) as u8);
    let mut terms = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        if v != 0.0 {
            terms.push((PauliString::from_dense_index(n_sites, k)?, phase * v));
        }
    }
    OperatorVector::from_terms(n_sites, terms)
}
