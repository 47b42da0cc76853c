//! Support-compressed storage for full-orthogonalization Krylov bases.

use std::collections::HashMap;
use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::par::{self, Exec};
use crate::pauli::OperatorVector;
use crate::{Error, Result};

/// Sorted nonzero positions shared by every vector with the same pattern.
#[derive(Debug)]
pub(crate) struct Support {
    id: usize,
    idx: Vec<u32>,
}

impl Support {
    pub(crate) fn len(&self) -> usize {
        self.idx.len()
    }
}

#[derive(Debug)]
enum Payload {
    Ram(Vec<f64>),
    Disk { offset: u64, digest: [u8; 32] },
}

#[derive(Debug)]
struct Stored {
    support: Arc<Support>,
    payload: Payload,
}

#[derive(Debug)]
struct Spill {
    file: File,
    end: u64,
}

/// Ordered orthonormal vectors `R_0, R_1, ...` of the real-reduced Krylov space.
///
/// Values live in RAM until the optional budget is spent, then go to an
/// anonymous spill file in sha256-checksummed chunks (one per vector).
#[derive(Debug)]
pub struct KrylovBasis {
    n_sites: usize,
    vectors: Vec<Stored>,
    supports: Vec<Arc<Support>>,
    /// Indices of stored vectors per support id.
    members: Vec<Vec<usize>>,
    disjoint: HashMap<(usize, usize), bool>,
    ram_bytes: usize,
    budget: Option<usize>,
    spill: Option<Spill>,
    spilled: usize,
}

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn to_bytes(vals: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(vals.len() * 8);
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn from_bytes(bytes: &[u8], out: &mut Vec<f64>) {
    out.clear();
    out.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
}

fn sorted_disjoint(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

impl KrylovBasis {
    pub fn new(n_sites: usize) -> Self {
        KrylovBasis {
            n_sites,
            vectors: Vec::new(),
            supports: Vec::new(),
            members: Vec::new(),
            disjoint: HashMap::new(),
            ram_bytes: 0,
            budget: None,
            spill: None,
            spilled: 0,
        }
    }

    /// Caps the bytes of vector values held in RAM.
    pub fn with_memory_budget(mut self, bytes: Option<usize>) -> Self {
        self.budget = bytes;
        self
    }

    /// Enables spilling past the memory budget into an unnamed file under `dir`.
    pub fn with_spill_dir(mut self, dir: &Path) -> Result<Self> {
        let file = tempfile::tempfile_in(dir)?;
        self.spill = Some(Spill { file, end: 0 });
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1usize << (2 * self.n_sites)
    }

    pub fn ram_bytes(&self) -> usize {
        self.ram_bytes
    }

    pub fn spilled_vectors(&self) -> usize {
        self.spilled
    }

    pub fn nonzeros(&self, i: usize) -> usize {
        self.vectors[i].support.len()
    }

    /// Support of `dense`, shared with an existing identical support if any.
    pub(crate) fn intern(&mut self, dense: &[f64]) -> Arc<Support> {
        let idx: Vec<u32> = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, _)| k as u32)
            .collect();
        if let Some(s) = self.supports.iter().rev().find(|s| s.idx == idx) {
            return s.clone();
        }
        self.ram_bytes += idx.len() * 4;
        let s = Arc::new(Support { id: self.supports.len(), idx });
        self.supports.push(s.clone());
        self.members.push(Vec::new());
        s
    }

    fn is_disjoint(&mut self, a: &Arc<Support>, b: &Arc<Support>) -> bool {
        if a.id == b.id {
            return a.idx.is_empty();
        }
        let key = (a.id.min(b.id), a.id.max(b.id));
        *self.disjoint.entry(key).or_insert_with(|| sorted_disjoint(&a.idx, &b.idx))
    }

    /// Stores `dense` restricted to `support`. Returns `false` when the budget
    /// is spent and no spill file is configured.
    pub(crate) fn push(&mut self, dense: &[f64], support: Arc<Support>) -> Result<bool> {
        let vals: Vec<f64> = support.idx.iter().map(|&k| dense[k as usize]).collect();
        let bytes = vals.len() * 8;
        let over = self.budget.is_some_and(|b| self.ram_bytes + bytes > b);
        let payload = if !over {
            self.ram_bytes += bytes;
            Payload::Ram(vals)
        } else if let Some(spill) = self.spill.as_mut() {
            let raw = to_bytes(&vals);
            spill.file.write_all_at(&raw, spill.end)?;
            let offset = spill.end;
            spill.end += raw.len() as u64;
            self.spilled += 1;
            Payload::Disk { offset, digest: digest(&raw) }
        } else {
            return Ok(false);
        };
        self.members[support.id].push(self.vectors.len());
        self.vectors.push(Stored { support, payload });
        Ok(true)
    }

    fn read_into(&self, i: usize, verify: bool, buf: &mut Vec<f64>) -> Result<()> {
        let s = &self.vectors[i];
        match &s.payload {
            Payload::Ram(v) => {
                buf.clear();
                buf.extend_from_slice(v);
            }
            Payload::Disk { offset, digest: d } => {
                let spill = self.spill.as_ref().expect("disk payload implies spill file");
                let mut raw = vec![0u8; s.support.len() * 8];
                spill.file.read_exact_at(&mut raw, *offset)?;
                if verify && digest(&raw) != *d {
                    return Err(Error::Checksum(i));
                }
                from_bytes(&raw, buf);
            }
        }
        Ok(())
    }

    fn with_values<R>(&self, i: usize, buf: &mut Vec<f64>, f: impl FnOnce(&[f64]) -> R) -> Result<R> {
        match &self.vectors[i].payload {
            Payload::Ram(v) => Ok(f(v)),
            Payload::Disk { .. } => {
                self.read_into(i, false, buf)?;
                Ok(f(buf))
            }
        }
    }

    /// `⟨R_i, w⟩` for every stored vector; exact zeros for disjoint supports.
    ///
    /// Vectors sharing a support are handled together against one gathered
    /// copy of `w`, so the inner products run over contiguous memory.
    pub(crate) fn dots(&mut self, exec: Exec, w: &[f64], w_support: &Arc<Support>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        let mut buf = Vec::new();
        for sid in 0..self.supports.len() {
            let sup = self.supports[sid].clone();
            if self.members[sid].is_empty() || self.is_disjoint(&sup, w_support) {
                continue;
            }
            let ws: Vec<f64> = sup.idx.iter().map(|&k| w[k as usize]).collect();
            for &i in &self.members[sid] {
                out[i] = self.with_values(i, &mut buf, |vals| par::dot(exec, vals, &ws))?;
            }
        }
        Ok(out)
    }

    /// `w -= Σ_i c_i R_i`, skipping zero coefficients.
    pub(crate) fn subtract(&self, exec: Exec, coeffs: &[f64], w: &mut [f64]) -> Result<()> {
        let mut buf = Vec::new();
        for (sup, members) in self.supports.iter().zip(&self.members) {
            if members.iter().all(|&i| coeffs[i] == 0.0) {
                continue;
            }
            let mut ws: Vec<f64> = sup.idx.iter().map(|&k| w[k as usize]).collect();
            for &i in members {
                let c = coeffs[i];
                if c != 0.0 {
                    self.with_values(i, &mut buf, |vals| par::axpy(exec, -c, vals, &mut ws))?;
                }
            }
            for (&k, v) in sup.idx.iter().zip(&ws) {
                w[k as usize] = *v;
            }
        }
        Ok(())
    }

    /// Dense real coefficients of `R_i`, checksum-verified when spilled.
    pub fn vector_dense(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.len() {
            return Err(Error::OutOfRange { index: i, max: self.len().saturating_sub(1) });
        }
        let mut buf = Vec::new();
        self.read_into(i, true, &mut buf)?;
        let mut out = vec![0.0; self.dim()];
        for (k, v) in self.vectors[i].support.idx.iter().zip(&buf) {
            out[*k as usize] = *v;
        }
        Ok(out)
    }

    /// Krylov operator `O_i = i^i R_i`.
    pub fn operator(&self, i: usize) -> Result<OperatorVector> {
        super::from_dense_real(self.n_sites, i, &self.vector_dense(i)?)
    }

    pub fn verify_checksums(&self) -> Result<()> {
        let mut buf = Vec::new();
        for i in 0..self.len() {
            self.read_into(i, true, &mut buf)?;
        }
        Ok(())
    }

    /// `⟨R_i, R_j⟩`.
    pub fn overlap(&mut self, i: usize, j: usize) -> Result<f64> {
        let (si, sj) = (self.vectors[i].support.clone(), self.vectors[j].support.clone());
        if self.is_disjoint(&si, &sj) {
            return Ok(0.0);
        }
        let dense = self.vector_dense(j)?;
        let mut buf = Vec::new();
        self.with_values(i, &mut buf, |vals| {
            par::chunked_sum(Exec::Sequential, vals.len(), |r| {
                r.map(|k| vals[k] * dense[si.idx[k] as usize]).sum()
            })
        })
    }
}

/// Off-diagonal overlap statistics of a stored basis.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OrthogonalityReport {
    pub max: f64,
    /// Entry `k` is `max_{j<k+1} |⟨R_{k+1}, R_j⟩|`.
    pub per_step: Vec<f64>,
    pub max_norm_deviation: f64,
}

pub fn orthogonality_report(basis: &mut KrylovBasis) -> Result<OrthogonalityReport> {
    let mut per_step = Vec::new();
    let mut max_norm_deviation: f64 = 0.0;
    for i in 0..basis.len() {
        max_norm_deviation = max_norm_deviation.max((basis.overlap(i, i)? - 1.0).abs());
        if i == 0 {
            continue;
        }
        let mut m: f64 = 0.0;
        for j in 0..i {
            m = m.max(basis.overlap(i, j)?.abs());
        }
        per_step.push(m);
    }
    let max = per_step.iter().copied().fold(0.0, f64::max);
    Ok(OrthogonalityReport { max, per_step, max_norm_deviation })
}
