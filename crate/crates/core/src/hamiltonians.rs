//! Spin-chain models, named observables and the moment-overlap diagnostic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::pauli::{OperatorVector, Pauli, PauliString};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Symbolic Hamiltonian: weighted Pauli strings plus lattice metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinChainModel {
    pub n_sites: usize,
    pub boundary: Boundary,
    pub terms: Vec<(PauliString, f64)>,
    pub label: String,
}

impl SpinChainModel {
    pub fn new(
        n_sites: usize,
        boundary: Boundary,
        terms: Vec<(PauliString, f64)>,
        label: impl Into<String>,
    ) -> Result<Self> {
        for (p, c) in &terms {
            if p.n_sites() != n_sites {
                return Err(Error::SizeMismatch { left: n_sites, right: p.n_sites() });
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "coupling",
                    reason: format!("non-finite coupling {c} on {p}"),
                });
            }
        }
        Ok(SpinChainModel { n_sites, boundary, terms, label: label.into() })
    }

    /// Assembled Hamiltonian; real couplings on Hermitian strings, so always Hermitian.
    pub fn operator(&self) -> OperatorVector {
        OperatorVector::from_real_terms(self.n_sites, self.terms.iter().copied())
            .expect("terms validated at construction")
    }

    /// Every coupling multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        SpinChainModel {
            terms: self.terms.iter().map(|&(p, v)| (p, v * c)).collect(),
            label: format!("{}*{}", c, self.label),
            ..self.clone()
        }
    }
}

fn require_sites(n_sites: usize) -> Result<()> {
    if n_sites < 2 {
        return Err(Error::UnsupportedSize { n_sites, min: 2, max: crate::pauli::MAX_SITES });
    }
    Ok(())
}

fn bonds(n_sites: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut out: Vec<_> = (0..n_sites - 1).map(|j| (j, j + 1)).collect();
    // At L = 2 the wrap-around bond coincides with the open one and adds to it.
    if boundary == Boundary::Periodic {
        out.push((n_sites - 1, 0));
    }
    out
}

fn two_site(n: usize, (i, j): (usize, usize), p: Pauli) -> PauliString {
    PauliString::from_ops(n, &[(i, p), (j, p)]).expect("sites in range")
}

fn one_site(n: usize, i: usize, p: Pauli) -> PauliString {
    PauliString::single(n, i, p).expect("site in range")
}

/// `H = Σ_j (J σ^x_j σ^x_{j+1} + h_x σ^x_j + h_z σ^z_j)`.
///
/// Zero couplings are kept as explicit terms so that term counts follow the
/// lattice; they vanish when the operator is assembled.
pub fn build_ising(j: f64, hx: f64, hz: f64, n_sites: usize, boundary: Boundary) -> Result<SpinChainModel> {
    require_sites(n_sites)?;
    let mut terms: Vec<_> =
        bonds(n_sites, boundary).into_iter().map(|b| (two_site(n_sites, b, Pauli::X), j)).collect();
    for i in 0..n_sites {
        terms.push((one_site(n_sites, i, Pauli::X), hx));
        terms.push((one_site(n_sites, i, Pauli::Z), hz));
    }
    let b = match boundary {
        Boundary::Periodic => "pbc",
        Boundary::Open => "obc",
    };
    SpinChainModel::new(n_sites, boundary, terms, format!("ising[J={j},hx={hx},hz={hz}],L={n_sites},{b}"))
}

/// Open chain `−Σ σ^x σ^x + U Σ σ^z σ^z − (μ/2) Σ σ^z` hosting an approximate
/// boundary zero mode.
pub fn build_zero_mode_chain(u: f64, mu: f64, n_sites: usize) -> Result<SpinChainModel> {
    require_sites(n_sites)?;
    let mut terms = Vec::new();
    for b in bonds(n_sites, Boundary::Open) {
        terms.push((two_site(n_sites, b, Pauli::X), -1.0));
        if u != 0.0 {
            terms.push((two_site(n_sites, b, Pauli::Z), u));
        }
    }
    if mu != 0.0 {
        for i in 0..n_sites {
            terms.push((one_site(n_sites, i, Pauli::Z), -mu / 2.0));
        }
    }
    SpinChainModel::new(n_sites, Boundary::Open, terms, format!("zero_mode[U={u},mu={mu}],L={n_sites},obc"))
}

/// Open transverse-field Ising chain `−J Σ σ^x σ^x − h Σ σ^z`; for `h < J`
/// the boundary `σ^x_1` has an exact edge mode.
pub fn build_edge_mode_tfim(j: f64, h: f64, n_sites: usize) -> Result<SpinChainModel> {
    require_sites(n_sites)?;
    let mut terms = Vec::new();
    if j != 0.0 {
        for b in bonds(n_sites, Boundary::Open) {
            terms.push((two_site(n_sites, b, Pauli::X), -j));
        }
    }
    if h != 0.0 {
        for i in 0..n_sites {
            terms.push((one_site(n_sites, i, Pauli::Z), -h));
        }
    }
    SpinChainModel::new(n_sites, Boundary::Open, terms, format!("edge_tfim[J={j},h={h}],L={n_sites},obc"))
}

/// A traceless, unit-norm Hermitian seed operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    pub seed: OperatorVector,
    pub label: String,
    pub normalized: bool,
    pub traceless: bool,
}

impl ObservableSpec {
    /// Validates Hermiticity and tracelessness, then normalizes.
    pub fn new(label: impl Into<String>, op: OperatorVector) -> Result<Self> {
        let violation = op.hermiticity_violation();
        if violation > crate::pauli::HERMITIAN_TOL {
            return Err(Error::NotHermitian { violation });
        }
        let id = op.identity_coefficient();
        if id.norm() > 0.0 {
            return Err(Error::NotTraceless(id.norm()));
        }
        let (seed, _) = op.normalize()?;
        Ok(ObservableSpec { seed, label: label.into(), normalized: true, traceless: true })
    }

    pub fn n_sites(&self) -> usize {
        self.seed.n_sites()
    }
}

/// The four probes used throughout: σ^z_1, σ^z_1σ^z_2, σ^y_1, σ^x_1 (site 1 is index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedObservable {
    #[serde(rename = "sigma_z_1")]
    SigmaZ1,
    #[serde(rename = "sigma_z_1z_2")]
    SigmaZ1Z2,
    #[serde(rename = "sigma_y_1")]
    SigmaY1,
    #[serde(rename = "sigma_x_1")]
    SigmaX1,
}

impl NamedObservable {
    pub fn label(self) -> &'static str {
        match self {
            NamedObservable::SigmaZ1 => "sigma_z_1",
            NamedObservable::SigmaZ1Z2 => "sigma_z_1z_2",
            NamedObservable::SigmaY1 => "sigma_y_1",
            NamedObservable::SigmaX1 => "sigma_x_1",
        }
    }

    pub fn build(self, n_sites: usize) -> Result<ObservableSpec> {
        let ops: &[(usize, Pauli)] = match self {
            NamedObservable::SigmaZ1 => &[(0, Pauli::Z)],
            NamedObservable::SigmaZ1Z2 => &[(0, Pauli::Z), (1, Pauli::Z)],
            NamedObservable::SigmaY1 => &[(0, Pauli::Y)],
            NamedObservable::SigmaX1 => &[(0, Pauli::X)],
        };
        let p = PauliString::from_ops(n_sites, ops)?;
        ObservableSpec::new(self.label(), OperatorVector::single(p))
    }
}

/// Single-site observable `σ^p` on 0-based `site`.
pub fn site_observable(n_sites: usize, site: usize, p: Pauli) -> Result<ObservableSpec> {
    let s = PauliString::single(n_sites, site, p)?;
    ObservableSpec::new(format!("sigma_{p:?}_{}", site + 1).to_lowercase(), OperatorVector::single(s))
}

pub const MOMENT_TOL: f64 = 1e-10;
pub const MOMENT_MAX_ORDER: usize = 6;

/// Smallest `m ≤ m_max` with a nonvanishing overlap `⟨O Ĥ^m⟩`, `Ĥ = H − ⟨H⟩`.
///
/// `|⟨O Ĥ^m⟩|` is compared against `tol · ‖Ĥ‖^m` with the infinite-temperature
/// norm `‖Ĥ‖ = sqrt(⟨Ĥ²⟩)`, which makes the answer invariant under `H → cH`.
/// `Ĥ^m O` is built by successive products in the Pauli basis; `m_max` is
/// capped at [`MOMENT_MAX_ORDER`].
pub fn moment_overlap_order(
    model: &SpinChainModel,
    obs: &ObservableSpec,
    m_max: usize,
    tol: f64,
) -> Result<Option<usize>> {
    if m_max == 0 {
        return Err(Error::InvalidParameter { name: "m_max", reason: "must be at least 1".into() });
    }
    if model.n_sites != obs.n_sites() {
        return Err(Error::SizeMismatch { left: model.n_sites, right: obs.n_sites() });
    }
    let m_max = m_max.min(MOMENT_MAX_ORDER);
    let h = model.operator();
    let mean = h.identity_coefficient();
    let id = PauliString::identity(model.n_sites)?;
    let centered = h.add(&OperatorVector::from_terms(model.n_sites, [(id, -mean)])?)?;
    let h_norm = centered.norm();
    if h_norm == 0.0 {
        return Ok(None);
    }
    let mut power = obs.seed.clone();
    for m in 1..=m_max {
        power = centered.mul(&power)?;
        // ⟨O Ĥ^m⟩ = Tr(Ĥ^m O)/2^L, the identity coefficient of Ĥ^m O.
        let moment: Complex64 = power.identity_coefficient();
        if moment.norm() > tol * h_norm.powi(m as i32) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}
