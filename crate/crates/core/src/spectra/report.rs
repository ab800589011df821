//! Allocation output: the per-tone CSV, the per-line summary CSV and a JSON
//! document holding everything needed to audit the allocation later.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Allocation, Diagnostics, Multipliers};
use crate::binder::{parse_error, to_json_sig17, w_to_dbm, ConstraintMode, Scenario};
use crate::error::{Error, Result};
use crate::numlin::{CMatrix, HermitianPsd};

pub const ALLOCATION_CSV_HEADER: &str = "tone,freq_hz,line,psd_w,b_nats";
pub const SUMMARY_CSV_HEADER: &str = "line,rate_mbps,power_dbm,lambda";

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One row per tone and line: transmit PSD in W per tone and the nats
/// attributed to that line on that tone.
pub fn allocation_csv(s: &Scenario, a: &Allocation) -> Result<String> {
    a.check_against(s)?;
    let mut out = String::with_capacity(64 * s.n_tones() * s.n_lines() + 64);
    out.push_str(ALLOCATION_CSV_HEADER);
    out.push('\n');
    for (i, tc) in s.tones().iter().enumerate() {
        for n in 0..s.n_lines() {
            writeln!(out, "{},{},{},{:e},{:e}", tc.index, tc.freq, n, a.psd[n][i], a.line_nats[n][i]).unwrap();
        }
    }
    Ok(out)
}

pub fn write_allocation_csv(s: &Scenario, a: &Allocation, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &allocation_csv(s, a)?)
}

/// One row per line: attributed rate, total power and multiplier.
pub fn summary_csv(a: &Allocation) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for n in 0..a.n_lines() {
        let lam = a.multipliers.lambda.get(n).copied().unwrap_or(0.0);
        writeln!(out, "{},{:.4},{:.4},{:e}", n, a.rates_per_line[n] / 1e6, w_to_dbm(a.per_modem_power[n]), lam)
            .unwrap();
    }
    out
}

pub fn write_summary_csv(a: &Allocation, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &summary_csv(a))
}

#[derive(Serialize, Deserialize)]
struct AllocationFile {
    algo: String,
    mode: ConstraintMode,
    n_lines: usize,
    f_sym_hz: f64,
    sum_rate_bps: f64,
    lambda: Vec<f64>,
    mu: Vec<Vec<f64>>,
    b_nats: Vec<f64>,
    line_nats: Vec<Vec<f64>>,
    phi: Vec<Vec<[f64; 2]>>,
    diagnostics: Diagnostics,
}

pub fn allocation_to_json(a: &Allocation, f_sym: f64) -> String {
    let file = AllocationFile {
        algo: a.algo.clone(),
        mode: a.mode,
        n_lines: a.n_lines(),
        f_sym_hz: f_sym,
        sum_rate_bps: a.sum_rate,
        lambda: a.multipliers.lambda.clone(),
        mu: a.multipliers.mu.clone(),
        b_nats: a.b_nats.clone(),
        line_nats: a.line_nats.clone(),
        phi: a.phi.iter().map(|p| p.as_slice().iter().map(|z| [z.re, z.im]).collect()).collect(),
        diagnostics: a.diagnostics.clone(),
    };
    to_json_sig17(&file)
}

/// Rebuilds an allocation; derived fields are recomputed from the stored
/// covariances and rates.
pub fn allocation_from_json(text: &str) -> Result<Allocation> {
    let f: AllocationFile = serde_json::from_str(text).map_err(parse_error)?;
    let n = f.n_lines;
    let nc = f.phi.len();
    if f.b_nats.len() != nc || f.line_nats.len() != n || f.line_nats.iter().any(|r| r.len() != nc) {
        return Err(Error::DimensionMismatch(format!("allocation tables do not match {n} lines x {nc} tones")));
    }
    let multipliers = Multipliers { lambda: f.lambda, mu: f.mu };
    multipliers.check(n, nc)?;
    let phi = f
        .phi
        .iter()
        .enumerate()
        .map(|(i, entries)| {
            if entries.len() != n * n {
                return Err(Error::DimensionMismatch(format!("covariance {i} has {} entries", entries.len())));
            }
            let m = CMatrix::new(n, n, entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect())?;
            Ok(HermitianPsd::from_lower(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Allocation::assemble(n, f.f_sym_hz, &f.algo, f.mode, multipliers, phi, f.b_nats, f.line_nats, f.diagnostics))
}

pub fn save_allocation(a: &Allocation, f_sym: f64, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &allocation_to_json(a, f_sym))
}

pub fn load_allocation(path: impl AsRef<Path>) -> Result<Allocation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    allocation_from_json(&text)
}
