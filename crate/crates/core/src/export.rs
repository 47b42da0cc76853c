//! CSV renderers with fixed headers.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same `f64`.

use std::fmt::Write;

use num_complex::Complex64;

use crate::analysis::{CumulativeProduct, RateSequence};
use crate::krylov::LanczosResult;

fn f(v: f64) -> String {
    format!("{v:e}")
}

/// `n,b_n,drift,terminated_flag`; the flag is 1 on the last row of a closed Krylov space.
pub fn coefficients_csv(res: &LanczosResult) -> String {
    coefficients_csv_from(&res.b, &res.orthogonality_drift, res.terminated.is_some())
}

/// Same layout from bare columns; `drift` may be shorter than `b` (missing entries print 0).
pub fn coefficients_csv_from(b: &[f64], drift: &[f64], terminated: bool) -> String {
    let mut out = String::from("n,b_n,drift,terminated_flag\n");
    for (i, v) in b.iter().enumerate() {
        let flag = u8::from(terminated && i + 1 == b.len());
        writeln!(out, "{},{},{},{}", i + 1, f(*v), f(drift.get(i).copied().unwrap_or(0.0)), flag).unwrap();
    }
    out
}

/// Parses the `b_n` column back from [`coefficients_csv`] output.
pub fn parse_coefficients_csv(text: &str) -> Result<Vec<f64>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "n,b_n,drift,terminated_flag" => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let field = l.split(',').nth(1).ok_or_else(|| format!("line {}: missing b_n", i + 2))?;
            field.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2))
        })
        .collect()
}

/// `t,re_c,im_c,method`
pub fn autocorrelation_csv(times: &[f64], values: &[Complex64], method: &str) -> String {
    let mut out = String::from("t,re_c,im_c,method\n");
    for (t, c) in times.iter().zip(values) {
        writeln!(out, "{},{},{},{}", f(*t), f(c.re), f(c.im), method).unwrap();
    }
    out
}

/// `omega,phi`
pub fn spectral_density_csv(omegas: &[f64], phi: &[f64]) -> String {
    let mut out = String::from("omega,phi\n");
    for (w, p) in omegas.iter().zip(phi) {
        writeln!(out, "{},{}", f(*w), f(*p)).unwrap();
    }
    out
}

/// `n,gamma_n`
pub fn rates_csv(r: &RateSequence) -> String {
    let mut out = String::from("n,gamma_n\n");
    for (n, g) in r.n.iter().zip(&r.gamma) {
        writeln!(out, "{},{}", n, f(*g)).unwrap();
    }
    out
}

/// `n,F,logF`, with `n` counting from 0 at `n*`.
pub fn cumprod_csv(cp: &CumulativeProduct) -> String {
    let mut out = String::from("n,F,logF\n");
    for (n, l) in cp.log_f.iter().enumerate() {
        writeln!(out, "{},{},{}", n, f(l.exp()), f(*l)).unwrap();
    }
    out
}

/// `n,value,L,m`
pub fn collapse_csv(curve: &[(usize, f64)], n_sites: usize, m: u32) -> String {
    let mut out = String::from("n,value,L,m\n");
    for (n, v) in curve {
        writeln!(out, "{},{},{},{}", n, f(*v), n_sites, m).unwrap();
    }
    out
}
