//! Versioned TOML run configuration.

use std::path::PathBuf;

use finite_lanczos::analysis::SyntheticFamily;
use finite_lanczos::hamiltonians::{
    build_edge_mode_tfim, build_ising, build_zero_mode_chain, Boundary, NamedObservable, ObservableSpec,
    SpinChainModel,
};
use finite_lanczos::krylov::{Method, Precision, MAX_DENSE_SITES};
use finite_lanczos::pauli::{OperatorVector, PauliString};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Ising { j: f64, hx: f64, hz: f64, boundary: Boundary },
    ZeroMode { u: f64, mu: f64 },
    EdgeModeTfim { j: f64, h: f64 },
    /// Closed-form `b_n`; ED is not available.
    Synthetic { family: SyntheticFamily },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    /// Dense (`"XZI"`) or sparse (`"X0 Z1"`) Pauli label.
    pub pauli: String,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableConfig {
    Named { name: NamedObservable },
    Explicit { label: String, terms: Vec<TermConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.0];
        }
        let dt = self.t_max / (self.points - 1) as f64;
        (0..self.points).map(|k| k as f64 * dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGrid {
    pub omega_max: f64,
    pub points: usize,
    /// Broadening; ten mean level spacings when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl SpectralGrid {
    pub fn omegas(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.0];
        }
        let dw = 2.0 * self.omega_max / (self.points - 1) as f64;
        (0..self.points).map(|k| -self.omega_max + k as f64 * dw).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub ortho_tol: f64,
    pub prune: f64,
    /// Relative to the spectral width when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { ortho_tol: finite_lanczos::krylov::DEFAULT_ORTHO_TOL, prune: 0.0, degeneracy_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Half-open range of cumulative-product indices; full post-crossover range when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
    /// Overlap order; detected from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    pub d: u32,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { window: None, m: None, d: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_mb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spill_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub sizes: Vec<usize>,
    pub methods: Vec<MethodName>,
    pub n_max: usize,
    pub output_dir: PathBuf,
    pub workers: usize,
    #[serde(default = "default_ed_cap")]
    pub ed_cap: usize,
    pub model: ModelConfig,
    pub observable: ObservableConfig,
    pub time: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralGrid>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    /// FO working precision.
    #[serde(default)]
    pub precision: Precision,
}

fn default_ed_cap() -> usize {
    finite_lanczos::ed::DEFAULT_DENSE_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodName {
    SA,
    FO,
    ED,
}

impl MethodName {
    pub fn krylov(self) -> Option<Method> {
        match self {
            MethodName::SA => Some(Method::SA),
            MethodName::FO => Some(Method::FO),
            MethodName::ED => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::SA => "SA",
            MethodName::FO => "FO",
            MethodName::ED => "ED",
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Applies `key.path=value` edits; values are parsed as TOML, falling
    /// back to a bare string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).expect("config is always serializable");
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| invalid(o, "override must look like key=value"))?;
            let key = key.trim();
            let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
            let mut slot = &mut root;
            let parts: Vec<&str> = key.split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = slot.as_table_mut().ok_or_else(|| invalid(key, format!("`{part}` is not inside a table")))?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), value.clone());
                    break;
                }
                slot = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        let text = toml::to_string(&root).expect("value tree serializes");
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, found {}", self.schema_version)));
        }
        if self.sizes.is_empty() {
            return Err(invalid("sizes", "size list is empty"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "method list is empty"));
        }
        if self.n_max == 0 {
            return Err(invalid("n_max", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        let synthetic = matches!(self.model, ModelConfig::Synthetic { .. });
        for &l in &self.sizes {
            if !synthetic && !(2..=MAX_DENSE_SITES).contains(&l) {
                return Err(invalid("sizes", format!("L = {l} outside 2..={MAX_DENSE_SITES}")));
            }
            if !synthetic && self.methods.contains(&MethodName::ED) && l > self.ed_cap {
                return Err(invalid("sizes", format!("ED requested at L = {l} above ed_cap = {}", self.ed_cap)));
            }
        }
        if synthetic && self.methods.contains(&MethodName::ED) {
            return Err(invalid("methods", "ED needs a Hamiltonian, not a synthetic family"));
        }
        if !(self.time.t_max >= 0.0 && self.time.t_max.is_finite()) || self.time.points == 0 {
            return Err(invalid("time", "need t_max >= 0 and at least one point"));
        }
        if let Some(s) = &self.spectral {
            if !(s.omega_max > 0.0) || s.points == 0 || s.epsilon.is_some_and(|e| !(e > 0.0)) {
                return Err(invalid("spectral", "need omega_max > 0, points > 0 and a positive epsilon"));
            }
        }
        if !(self.thresholds.ortho_tol > 0.0) {
            return Err(invalid("thresholds.ortho_tol", "must be positive"));
        }
        if !(self.thresholds.prune >= 0.0) {
            return Err(invalid("thresholds.prune", "must be non-negative"));
        }
        if self.thresholds.degeneracy_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(invalid("thresholds.degeneracy_tol", "must be positive"));
        }
        if self.fit.d == 0 || self.fit.m == Some(0) {
            return Err(invalid("fit", "m and d must be at least 1"));
        }
        if let Some([a, b]) = self.fit.window {
            if a >= b {
                return Err(invalid("fit.window", format!("empty range [{a}, {b})")));
            }
        }
        if let ObservableConfig::Explicit { terms, .. } = &self.observable {
            if terms.is_empty() {
                return Err(invalid("observable.terms", "no terms"));
            }
        }
        Ok(())
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.model, ModelConfig::Synthetic { .. })
    }

    pub fn build_model(&self, n_sites: usize) -> finite_lanczos::Result<SpinChainModel> {
        match &self.model {
            ModelConfig::Ising { j, hx, hz, boundary } => build_ising(*j, *hx, *hz, n_sites, *boundary),
            ModelConfig::ZeroMode { u, mu } => build_zero_mode_chain(*u, *mu, n_sites),
            ModelConfig::EdgeModeTfim { j, h } => build_edge_mode_tfim(*j, *h, n_sites),
            ModelConfig::Synthetic { .. } => Err(finite_lanczos::Error::InvalidParameter {
                name: "model",
                reason: "synthetic families have no Hamiltonian".into(),
            }),
        }
    }

    pub fn build_observable(&self, n_sites: usize) -> finite_lanczos::Result<ObservableSpec> {
        match &self.observable {
            ObservableConfig::Named { name } => name.build(n_sites),
            ObservableConfig::Explicit { label, terms } => {
                let parsed = terms
                    .iter()
                    .map(|t| Ok((PauliString::parse(n_sites, &t.pauli)?, t.coeff)))
                    .collect::<finite_lanczos::Result<Vec<_>>>()?;
                ObservableSpec::new(label.clone(), OperatorVector::from_real_terms(n_sites, parsed)?)
            }
        }
    }

    pub fn observable_label(&self) -> String {
        match &self.observable {
            ObservableConfig::Named { name } => name.label().to_string(),
            ObservableConfig::Explicit { label, .. } => label.clone(),
        }
    }
}
