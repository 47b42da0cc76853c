//! The coefficient, autocorrelation, comparison and analysis stages.
//!
//! Grid points `(L, source)` are computed on a worker pool and written in a
//! fixed order afterwards, so file contents do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use finite_lanczos::analysis::{self, classify_convergence, asymptotic_regime_check, synthetic_bn, AsymptoticFamily, SyntheticFamily};
use finite_lanczos::ed::DenseSpectrum;
use finite_lanczos::export;
use finite_lanczos::hamiltonians::{moment_overlap_order, MOMENT_MAX_ORDER, MOMENT_TOL};
use finite_lanczos::krylov::{lanczos_fo, lanczos_sa, LanczosOptions, Method};
use finite_lanczos::spectral::{
    autocorrelation_from_spectrum, default_broadening_from, plateau_from_b, spectral_density, TridiagonalLiouvillian,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{MethodName, ModelConfig, RunConfig};
use crate::output::Output;

const SYNTHETIC: &str = "synthetic";
/// Largest tridiagonal diagonalized for C(t) and Φ(ω).
const SPECTRUM_MAX_DIM: usize = 20_001;

/// One coefficient sequence with the metadata that identifies it.
#[derive(Debug, Clone)]
struct Coefficients {
    b: Vec<f64>,
    meta: Value,
}

pub struct Pipeline {
    cfg: RunConfig,
    out: Output,
    pool: rayon::ThreadPool,
    coefficients: BTreeMap<(usize, String), Coefficients>,
    correlations: BTreeMap<(usize, String), Vec<Complex64>>,
    correlated: bool,
}

fn run_key(l: usize, source: &str) -> String {
    format!("L{l}/{source}")
}

fn ones(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); n]
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(format!("{v}"))
    }
}

impl Pipeline {
    pub fn new(cfg: RunConfig, command: &str) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
        let out = Output::open(&cfg.output_dir, cfg.to_toml(), command)?;
        Ok(Pipeline { cfg, out, pool, coefficients: BTreeMap::new(), correlations: BTreeMap::new(), correlated: false })
    }

    pub fn finish(self) -> Result<()> {
        self.out.finish()
    }

    /// Coefficient sources per size: the Krylov methods, or the synthetic family.
    fn sources(&self) -> Vec<String> {
        if self.cfg.is_synthetic() {
            return vec![SYNTHETIC.to_string()];
        }
        self.cfg.methods.iter().filter(|m| m.krylov().is_some()).map(|m| m.as_str().to_string()).collect()
    }

    fn identity(&self, l: usize) -> Value {
        let model = match &self.cfg.model {
            ModelConfig::Synthetic { family } => serde_json::to_value(family).expect("family serializes"),
            _ => json!(self.cfg.build_model(l).map(|m| m.label).unwrap_or_default()),
        };
        json!({ "model": model, "observable": self.cfg.observable_label(), "n_max": self.cfg.n_max })
    }

    fn compute(&self, l: usize, source: &str) -> Result<(Coefficients, String)> {
        let cfg = &self.cfg;
        if let ModelConfig::Synthetic { family } = &cfg.model {
            let b = synthetic_bn(*family, cfg.n_max)?;
            let csv = export::coefficients_csv_from(&b, &[], false);
            let mut meta = self.identity(l);
            meta["n_coefficients"] = json!(b.len());
            return Ok((Coefficients { b, meta }, csv));
        }
        let model = cfg.build_model(l)?;
        let obs = cfg.build_observable(l)?;
        let mut opts = LanczosOptions::new(cfg.n_max)
            .ortho_tol(cfg.thresholds.ortho_tol)
            .prune_threshold(cfg.thresholds.prune)
            .memory_budget(cfg.memory.budget_mb.map(|mb| mb << 20))
            .spill_dir(cfg.memory.spill_dir.clone());
        opts = opts.precision(cfg.precision);
        let res = match source {
            "SA" => lanczos_sa(&model, &obs, &opts)?,
            "FO" => lanczos_fo(&model, &obs, &opts)?.0,
            other => bail!("unknown coefficient source {other}"),
        };
        let mut meta = self.identity(l);
        let extra = json!({
            "method": res.method,
            "n_coefficients": res.b.len(),
            "terminated": res.terminated,
            "partial": res.partial,
            "max_drift": res.max_drift(),
            "second_passes": res.second_passes,
            "prune": res.prune,
            "precision": if res.method == Method::FO { json!(cfg.precision) } else { Value::Null },
        });
        meta.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        let csv = export::coefficients_csv(&res);
        Ok((Coefficients { b: res.b, meta }, csv))
    }

    pub fn coefficients(&mut self) -> Result<()> {
        let jobs: Vec<(usize, String)> =
            self.cfg.sizes.iter().flat_map(|&l| self.sources().into_iter().map(move |s| (l, s))).collect();
        let this = &*self;
        let results: Vec<Result<(Coefficients, String)>> =
            self.pool.install(|| jobs.par_iter().map(|(l, s)| this.compute(*l, s)).collect());
        for ((l, s), r) in jobs.into_iter().zip(results) {
            let (c, csv) = r.with_context(|| format!("computing coefficients for L={l} {s}"))?;
            self.out.write(&format!("L{l}/{s}/coefficients.csv"), csv.as_bytes())?;
            self.out.record(&run_key(l, &s), c.meta.clone());
            eprintln!("L={l} {s}: {} coefficients", c.b.len());
            self.coefficients.insert((l, s), c);
        }
        Ok(())
    }

    /// In-memory coefficients, else the file on disk if its manifest entry
    /// matches the current model, observable and `n_max`.
    fn stored(&self, l: usize, source: &str) -> Result<Option<Vec<f64>>> {
        if let Some(c) = self.coefficients.get(&(l, source.to_string())) {
            return Ok(Some(c.b.clone()));
        }
        let want = self.identity(l);
        let Some(meta) = self.out.run(&run_key(l, source)) else { return Ok(None) };
        if ["model", "observable", "n_max"].iter().any(|k| meta.get(k) != want.get(k)) {
            return Ok(None);
        }
        let path = self.out.root().join(format!("L{l}/{source}/coefficients.csv"));
        let Ok(text) = std::fs::read_to_string(&path) else { return Ok(None) };
        let b = export::parse_coefficients_csv(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        Ok(Some(b))
    }

    fn ensure_coefficients(&mut self) -> Result<()> {
        let mut missing = false;
        for &l in &self.cfg.sizes {
            for s in self.sources() {
                match self.stored(l, &s)? {
                    Some(b) => {
                        let meta = self.out.run(&run_key(l, &s)).cloned().unwrap_or(Value::Null);
                        self.coefficients.insert((l, s), Coefficients { b, meta });
                    }
                    None => missing = true,
                }
            }
        }
        if missing {
            self.coefficients()?;
        }
        Ok(())
    }

    pub fn autocorrelation(&mut self) -> Result<()> {
        self.ensure_coefficients()?;
        let times = self.cfg.time.times();
        let sizes = self.cfg.sizes.clone();
        let mut plateau_rows = String::from("L,method,plateau,series\n");
        for &l in &sizes {
            for s in self.sources() {
                let b = self.coefficients[&(l, s.clone())].b.clone();
                let (strict, series) = if b.is_empty() {
                    (1.0, 1.0)
                } else {
                    let p = plateau_from_b(&b)?;
                    (p.strict, p.series)
                };
                writeln!(plateau_rows, "{l},{s},{strict:e},{series:e}").unwrap();
                self.out.record(&run_key(l, &s), json!({ "plateau": strict, "plateau_series": series }));
                if b.is_empty() {
                    let c = ones(times.len());
                    self.out.write(&format!("L{l}/{s}/autocorrelation.csv"), export::autocorrelation_csv(&times, &c, &s).as_bytes())?;
                    self.correlations.insert((l, s), c);
                    continue;
                }
                if b.len() + 1 > SPECTRUM_MAX_DIM {
                    eprintln!("L={l} {s}: {} coefficients exceed the spectrum limit of {SPECTRUM_MAX_DIM}, skipping C(t) and Φ(ω)", b.len());
                    self.out.record(&run_key(l, &s), json!({ "autocorrelation": "skipped" }));
                    continue;
                }
                let spec = TridiagonalLiouvillian::new(&b)?.seed_spectrum()?;
                let c = autocorrelation_from_spectrum(&spec, &times);
                self.out.write(&format!("L{l}/{s}/autocorrelation.csv"), export::autocorrelation_csv(&times, &c, &s).as_bytes())?;
                if let Some(grid) = &self.cfg.spectral {
                    let eps = grid.epsilon.unwrap_or_else(|| default_broadening_from(&spec));
                    let omegas = grid.omegas();
                    let phi = spectral_density(&b, &omegas, eps)?;
                    self.out.write(&format!("L{l}/{s}/spectral_density.csv"), export::spectral_density_csv(&omegas, &phi).as_bytes())?;
                }
                self.correlations.insert((l, s), c);
            }
        }
        if self.cfg.methods.contains(&MethodName::ED) {
            let this = &*self;
            let results: Vec<Result<(Vec<Complex64>, f64)>> = self.pool.install(|| {
                sizes
                    .par_iter()
                    .map(|&l| {
                        let spec = DenseSpectrum::with_cap(&this.cfg.build_model(l)?, &this.cfg.build_observable(l)?, this.cfg.ed_cap)?;
                        let tol = this.cfg.thresholds.degeneracy_tol.unwrap_or_else(|| spec.default_degeneracy_tol());
                        Ok((spec.autocorrelation(Default::default(), &times), spec.plateau(tol)))
                    })
                    .collect()
            });
            for (&l, r) in sizes.iter().zip(results) {
                let (c, p) = r.with_context(|| format!("exact diagonalization at L={l}"))?;
                self.out.write(&format!("L{l}/ED/autocorrelation.csv"), export::autocorrelation_csv(&times, &c, "ED").as_bytes())?;
                writeln!(plateau_rows, "{l},ED,{p:e},{p:e}").unwrap();
                self.out.record(&run_key(l, "ED"), json!({ "identity": self.identity(l), "plateau": p }));
                self.correlations.insert((l, "ED".to_string()), c);
            }
        }
        self.out.write("plateau.csv", plateau_rows.as_bytes())?;
        self.correlated = true;
        Ok(())
    }

    /// Maximum pairwise `|C_a(t) − C_b(t)|` over the time grid.
    pub fn compare(&mut self) -> Result<()> {
        if !self.correlated {
            self.autocorrelation()?;
        }
        let mut csv = String::from("L,method_a,method_b,max_abs_dev\n");
        for &l in &self.cfg.sizes {
            let here: Vec<(&String, &Vec<Complex64>)> =
                self.correlations.iter().filter(|((k, _), _)| *k == l).map(|((_, m), c)| (m, c)).collect();
            for (i, (ma, ca)) in here.iter().enumerate() {
                for (mb, cb) in &here[i + 1..] {
                    let dev = ca.iter().zip(cb.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                    writeln!(csv, "{l},{ma},{mb},{dev:e}").unwrap();
                    println!("L={l:<3} {ma:>9} vs {mb:<9} max |ΔC| = {dev:.3e}");
                }
            }
        }
        self.out.write("compare.csv", csv.as_bytes())?;
        Ok(())
    }

    fn overlap_order(&self, l: usize) -> Result<Option<usize>> {
        if let Some(m) = self.cfg.fit.m {
            return Ok(Some(m as usize));
        }
        if self.cfg.is_synthetic() {
            return Ok(None);
        }
        let model = self.cfg.build_model(l)?;
        let obs = self.cfg.build_observable(l)?;
        Ok(moment_overlap_order(&model, &obs, MOMENT_MAX_ORDER, MOMENT_TOL)?)
    }

    pub fn analyze(&mut self) -> Result<()> {
        let window = self.cfg.fit.window.map(|[a, b]| a..b);
        let d = self.cfg.fit.d;
        for &l in &self.cfg.sizes.clone() {
            let detected = self.overlap_order(l)?;
            let m = detected.unwrap_or(1) as u32;
            for s in self.sources() {
                let b = self.stored(l, &s)?.ok_or_else(|| {
                    anyhow!("missing input L{l}/{s}/coefficients.csv for the current configuration; run `coefficients` first")
                })?;
                let dir = format!("L{l}/{s}");
                let mut report = json!({
                    "L": l,
                    "source": s,
                    "m_detected": detected,
                    "m": m,
                    "d": d,
                });
                match analysis::analyze(&b, l, m, d, window.clone()) {
                    Ok(bundle) => {
                        self.out.write(&format!("{dir}/rates.csv"), export::rates_csv(&bundle.rates).as_bytes())?;
                        self.out.write(&format!("{dir}/cumprod.csv"), export::cumprod_csv(&bundle.cumulative).as_bytes())?;
                        self.out.write(&format!("{dir}/collapse.csv"), export::collapse_csv(&bundle.collapse, l, m).as_bytes())?;
                        let fit = match &bundle.fit {
                            Some(f) => serde_json::to_value(f)?,
                            None => json!({ "error": bundle.fit_error }),
                        };
                        self.out.write(&format!("{dir}/fit.json"), (serde_json::to_string_pretty(&fit)? + "\n").as_bytes())?;
                        report["n_star"] = json!(bundle.n_star);
                        report["gamma_bar"] = bundle.fit.as_ref().map_or(Value::Null, |f| num(f.gamma_bar));
                        report["plateau"] = serde_json::to_value(bundle.plateau)?;
                        report["lgamma"] = match analysis::lgamma_estimate(&b, l, window.clone()) {
                            Ok(e) => serde_json::to_value(e)?,
                            Err(e) => json!({ "error": e.to_string() }),
                        };
                    }
                    Err(e) => {
                        eprintln!("L={l} {s}: analysis skipped: {e}");
                        report["error"] = json!(e.to_string());
                    }
                }
                if let ModelConfig::Synthetic { family: SyntheticFamily::PowerRate { alpha, beta } } = self.cfg.model {
                    report["classifier"] = json!(classify_convergence(alpha, beta)?);
                    if self.cfg.n_max >= 100 {
                        report["regime"] = serde_json::to_value(asymptotic_regime_check(AsymptoticFamily { alpha, beta }, self.cfg.n_max)?)?;
                    }
                }
                self.out.write(&format!("{dir}/analysis.json"), (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
            }
        }
        Ok(())
    }
}
