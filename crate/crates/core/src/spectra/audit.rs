use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tone_solve, Allocation, Multipliers, SolverOptions};
use crate::binder::{ConstraintMode, Scenario};
use crate::error::Result;
use crate::numlin::{svd, CMatrix, HermitianPsd};

/// Normalized KKT residuals of an allocation. The serialized form carries
/// the five headline numbers; the breakdown is in-memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest of the power, mask and PSD violations.
    pub feasibility: f64,
    /// `max(0, -min multiplier)`.
    pub dual_feasibility: f64,
    /// Largest `λ|P - P^tot|` or `μ|φ - mask|`, over `1 + Σλ P^tot + Σμ mask`.
    pub comp_slack: f64,
    /// Max over tones of `‖Φ_i - Φ*(Λ_i)‖_F / (1 + ‖Φ_i‖_F)`.
    pub stationarity: f64,
    pub converged: bool,
    #[serde(skip)]
    pub power_violation: f64,
    #[serde(skip)]
    pub mask_violation: f64,
    #[serde(skip)]
    pub psd_violation: f64,
    /// Stationarity relative to the covariance sizes, for small-power scales.
    #[serde(skip)]
    pub stationarity_rel: f64,
}

impl KktReport {
    /// True when every residual is within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.feasibility <= tol && self.dual_feasibility <= tol && self.comp_slack <= tol && self.stationarity <= tol
    }

    pub fn max_residual(&self) -> f64 {
        self.feasibility.max(self.dual_feasibility).max(self.comp_slack).max(self.stationarity)
    }
}

fn excess(value: f64, budget: f64) -> f64 {
    if budget > 0.0 {
        ((value - budget) / budget).max(0.0)
    } else {
        value.max(0.0)
    }
}

/// Smallest eigenvalue of a Hermitian matrix: the singular values of the
/// PSD shift `A + cI` are its eigenvalues.
fn min_eigenvalue(a: &HermitianPsd) -> Result<f64> {
    let c = a.frobenius_norm();
    if c == 0.0 {
        return Ok(0.0);
    }
    let shifted = a.as_matrix().add(&CMatrix::identity(a.dim()).scale(c.into()));
    let d = svd(&shifted)?.d;
    Ok(d.last().copied().unwrap_or(c) - c)
}

/// KKT residual report of `a` on scenario `s`. The constraint set is the
/// allocation's own mode.
pub fn kkt_audit(s: &Scenario, a: &Allocation) -> Result<KktReport> {
    a.check_against(s)?;
    let floor = SolverOptions::default().lambda_floor;
    let gamma = s.gamma();
    let m = &a.multipliers;

    let power_violation = match a.mode {
        ConstraintMode::Total => excess(a.per_modem_power.iter().sum(), s.total_budget()),
        _ => a.per_modem_power.iter().zip(s.p_tot()).map(|(&p, &b)| excess(p, b)).fold(0.0, f64::max),
    };
    let masked = a.mode == ConstraintMode::PerModemMask;
    let mask_violation = if masked { super::mask_excess(s, &a.psd) } else { 0.0 };

    let per_tone: Vec<Result<(f64, f64, f64)>> = s
        .tones()
        .par_iter()
        .zip(a.phi.par_iter())
        .enumerate()
        .map(|(i, (tc, phi))| {
            let norm = phi.frobenius_norm();
            let neg = (-min_eigenvalue(phi)?).max(0.0);
            let psd = if norm > 0.0 { neg / norm } else { 0.0 };
            let target = if tc.is_dead() {
                CMatrix::zeros(s.n_lines(), s.n_lines())
            } else {
                tone_solve(tc, &m.effective(i, floor), gamma)?.phi.into_matrix()
            };
            let diff = phi.as_matrix().sub(&target).frobenius_norm();
            let scale = norm + target.frobenius_norm();
            Ok((psd, diff / (1.0 + norm), if scale > 0.0 { diff / scale } else { 0.0 }))
        })
        .collect();
    let (mut psd_violation, mut stationarity, mut stationarity_rel) = (0.0f64, 0.0f64, 0.0f64);
    for r in per_tone {
        let (p, st, rel) = r?;
        psd_violation = psd_violation.max(p);
        stationarity = stationarity.max(st);
        stationarity_rel = stationarity_rel.max(rel);
    }

    let min_mult = m.lambda.iter().chain(m.mu.iter().flatten()).fold(f64::INFINITY, |acc, &x| acc.min(x));
    let dual_feasibility = if min_mult.is_finite() { (-min_mult).max(0.0) } else { 0.0 };

    let mut scale = 1.0;
    let mut worst = 0.0f64;
    match a.mode {
        ConstraintMode::Total => {
            let lam = m.lambda.iter().copied().fold(0.0, f64::max);
            let total: f64 = a.per_modem_power.iter().sum();
            scale += lam.abs() * s.total_budget();
            worst = worst.max(lam.abs() * (total - s.total_budget()).abs());
        }
        _ => {
            for ((&lam, &p), &b) in m.lambda.iter().zip(&a.per_modem_power).zip(s.p_tot()) {
                scale += lam.abs() * b;
                worst = worst.max(lam.abs() * (p - b).abs());
            }
        }
    }
    for ((mu_row, psd_row), mask_row) in m.mu.iter().zip(&a.psd).zip(s.mask()) {
        for ((&mu, &phi), &mask) in mu_row.iter().zip(psd_row).zip(mask_row) {
            if mu == 0.0 {
                continue;
            }
            if !(masked && mask.is_finite()) {
                // a price on a constraint that does not exist
                worst = f64::MAX;
                continue;
            }
            scale += mu.abs() * mask;
            worst = worst.max(mu.abs() * (phi - mask).abs());
        }
    }
    let comp_slack = if worst == f64::MAX { worst } else { worst / scale };

    Ok(KktReport {
        feasibility: power_violation.max(mask_violation).max(psd_violation),
        dual_feasibility,
        comp_slack,
        stationarity,
        converged: a.diagnostics.converged,
        power_violation,
        mask_violation,
        psd_violation,
        stationarity_rel,
    })
}

/// Lagrangian dual `Σ_i [b_i − Σ_n Λ_{n,i} φ_{n,i}] + Σ_n λ_n P_n + Σ μ_{n,i} mask_{n,i}`,
/// evaluated at the per-tone optima. A price on an unmasked entry makes the
/// dual `+∞`.
pub fn dual_value(s: &Scenario, m: &Multipliers) -> Result<f64> {
    m.check(s.n_lines(), s.n_tones())?;
    let floor = SolverOptions::default().lambda_floor;
    let gamma = s.gamma();
    let per_tone: Vec<Result<f64>> = s
        .tones()
        .par_iter()
        .enumerate()
        .map(|(i, tc)| {
            if tc.is_dead() {
                return Ok(0.0);
            }
            let lam = m.effective(i, floor);
            let sol = tone_solve(tc, &lam, gamma)?;
            Ok(sol.b_nats - lam.iter().zip(&sol.phi_diag).map(|(l, p)| l * p).sum::<f64>())
        })
        .collect();
    let mut value = 0.0;
    for v in per_tone {
        value += v?;
    }
    value += m.lambda.iter().zip(s.p_tot()).map(|(l, p)| l * p).sum::<f64>();
    for (mu_row, mask_row) in m.mu.iter().zip(s.mask()) {
        for (&mu, &mask) in mu_row.iter().zip(mask_row) {
            if mu != 0.0 {
                value += mu * mask;
            }
        }
    }
    Ok(value)
}
