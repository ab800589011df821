//! Optimization core: the per-tone solve for a fixed multiplier diagonal,
//! the multiplier searches for the three constraint sets, the mask
//! truncation heuristic and KKT / duality auditing.
//!
//! Rates are handled in nats internally so the waterfilling level is exactly
//! one when multipliers are in nats/W. Reported rates are bits/s.

mod audit;
mod report;
mod root;
mod search;
mod tone;

use serde::{Deserialize, Serialize};

use crate::binder::{ConstraintMode, Scenario};
use crate::error::{Error, Result};
use crate::numlin::HermitianPsd;

pub use audit::{dual_value, kkt_audit, KktReport};
pub use report::{
    allocation_csv, allocation_from_json, allocation_to_json, load_allocation, save_allocation, summary_csv,
    write_allocation_csv, write_summary_csv, ALLOCATION_CSV_HEADER, SUMMARY_CSV_HEADER,
};
pub use search::{algo1_total_power, algo2_per_modem, algo3_per_modem_mask, truncation_baseline};
pub use tone::{rate_of_cov, tone_solve, ToneSolution};

pub(crate) use root::{solve_increasing, Point};
pub(crate) use tone::{rate_whitened, whiten};

/// Dual prices: `lambda[n]` per modem and `mu[n][i]` per line and tone
/// position, both in nats/W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
}

impl Multipliers {
    pub fn zeros(n_lines: usize, n_tones: usize) -> Self {
        Multipliers { lambda: vec![0.0; n_lines], mu: vec![vec![0.0; n_tones]; n_lines] }
    }

    pub fn uniform(lambda: f64, n_lines: usize, n_tones: usize) -> Self {
        Multipliers { lambda: vec![lambda; n_lines], mu: vec![vec![0.0; n_tones]; n_lines] }
    }

    pub fn n_lines(&self) -> usize {
        self.lambda.len()
    }

    /// `Λ_i = diag(λ_n + μ_{n,i})`, floored at `floor`.
    pub fn effective(&self, tone: usize, floor: f64) -> Vec<f64> {
        self.lambda.iter().zip(&self.mu).map(|(&l, mu)| (l + mu[tone]).max(floor)).collect()
    }

    fn check(&self, n_lines: usize, n_tones: usize) -> Result<()> {
        if self.lambda.len() != n_lines || self.mu.len() != n_lines || self.mu.iter().any(|m| m.len() != n_tones) {
            return Err(Error::DimensionMismatch(format!("multipliers must be {n_lines} lines x {n_tones} tones")));
        }
        Ok(())
    }
}

/// Tolerances and iteration caps of the multiplier searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative tolerance on power budgets.
    pub eps_power: f64,
    /// Relative tolerance on mask levels.
    pub eps_mask: f64,
    pub lambda_floor: f64,
    /// Outer sweeps (per-modem searches) or bracket expansions (total power).
    pub max_outer: usize,
    /// Iterations of each one-dimensional root search.
    pub max_bisect: usize,
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps_power: 1e-10,
            eps_mask: 1e-9,
            lambda_floor: 1e-12,
            max_outer: 200,
            max_bisect: 200,
            kkt_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !(pos(self.eps_power) && pos(self.eps_mask) && pos(self.lambda_floor) && pos(self.kkt_tol)) {
            return Err(Error::InvalidInput("solver tolerances must be finite and positive".into()));
        }
        if self.max_outer == 0 || self.max_bisect == 0 {
            return Err(Error::InvalidInput("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Outer iterations (bracket steps for the total-power search).
    pub iterations: usize,
    /// Full passes over all tones.
    pub evaluations: usize,
    /// Relative budget error per constraint: one entry in total-power mode,
    /// one per line otherwise. Slack lines report 0.
    pub power_residuals: Vec<f64>,
    /// Largest relative mask excess.
    pub mask_residual: f64,
    pub converged: bool,
    /// Tone indices left unallocated because the channel was singular.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_tones: Vec<usize>,
}

/// A transmit allocation together with its rates and search diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Producer: `algo1`, `algo2`, `algo3`, `truncation`, `dp` or `zf`.
    pub algo: String,
    /// Constraint set the allocation is meant to satisfy.
    pub mode: ConstraintMode,
    pub multipliers: Multipliers,
    /// Transmit covariance per tone position.
    pub phi: Vec<HermitianPsd>,
    /// `psd[n][i] = [Φ_i]_nn` in W per tone.
    pub psd: Vec<Vec<f64>>,
    /// Tone rates in nats per symbol.
    pub b_nats: Vec<f64>,
    /// `line_nats[n][i]`: share of tone `i`'s rate attributed to line `n`.
    pub line_nats: Vec<Vec<f64>>,
    /// Rates in bits/s attributed to each line.
    pub rates_per_line: Vec<f64>,
    /// Bits/s.
    pub sum_rate: f64,
    /// W, summed over tones in tone order.
    pub per_modem_power: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Allocation {
    pub fn n_lines(&self) -> usize {
        self.psd.len()
    }

    pub fn n_tones(&self) -> usize {
        self.phi.len()
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.converged
    }

    /// Builds the derived fields from per-tone covariances, tone rates and
    /// per-line nats. `line_nats[n][i]` is the rate attributed to line `n`
    /// on tone `i`.
    pub(crate) fn assemble(
        n_lines: usize,
        f_sym: f64,
        algo: &str,
        mode: ConstraintMode,
        multipliers: Multipliers,
        phi: Vec<HermitianPsd>,
        b_nats: Vec<f64>,
        line_nats: Vec<Vec<f64>>,
        diagnostics: Diagnostics,
    ) -> Allocation {
        let psd: Vec<Vec<f64>> = (0..n_lines).map(|k| phi.iter().map(|p| p[(k, k)].re).collect()).collect();
        let per_modem_power = psd.iter().map(|row| row.iter().sum()).collect();
        let to_bps = f_sym / std::f64::consts::LN_2;
        let rates_per_line = line_nats.iter().map(|row| row.iter().sum::<f64>() * to_bps).collect();
        let sum_rate = b_nats.iter().sum::<f64>() * to_bps;
        Allocation {
            algo: algo.to_string(),
            mode,
            multipliers,
            phi,
            psd,
            b_nats,
            line_nats,
            rates_per_line,
            sum_rate,
            per_modem_power,
            diagnostics,
        }
    }

    pub(crate) fn check_against(&self, s: &Scenario) -> Result<()> {
        if self.n_lines() != s.n_lines() || self.n_tones() != s.n_tones() || self.b_nats.len() != s.n_tones() {
            return Err(Error::DimensionMismatch(format!(
                "allocation is {} lines x {} tones, scenario is {} x {}",
                self.n_lines(),
                self.n_tones(),
                s.n_lines(),
                s.n_tones()
            )));
        }
        if self.phi.iter().any(|p| p.dim() != s.n_lines()) {
            return Err(Error::DimensionMismatch("covariance size differs from line count".into()));
        }
        self.multipliers.check(s.n_lines(), s.n_tones())
    }
}

fn rel_error(value: f64, budget: f64) -> f64 {
    if budget > 0.0 {
        (value - budget).abs() / budget
    } else {
        value.abs()
    }
}

/// Relative budget errors: one entry for the total budget, or one per line.
/// Lines priced at `floor` or below and under budget are slack and report 0.
pub(crate) fn power_residuals(
    s: &Scenario,
    mode: ConstraintMode,
    power: &[f64],
    lambda: &[f64],
    floor: f64,
) -> Vec<f64> {
    match mode {
        ConstraintMode::Total => vec![rel_error(power.iter().sum(), s.total_budget())],
        _ => power
            .iter()
            .zip(s.p_tot())
            .enumerate()
            .map(|(n, (&p, &b))| {
                let slack = lambda.get(n).is_none_or(|&l| l <= floor) && p <= b;
                if slack {
                    0.0
                } else {
                    rel_error(p, b)
                }
            })
            .collect(),
    }
}

/// Largest relative excess of a PSD table over the scenario masks.
pub(crate) fn mask_excess(s: &Scenario, psd: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (row, mask) in psd.iter().zip(s.mask()) {
        for (&p, &m) in row.iter().zip(mask) {
            if m.is_finite() && p > m {
                worst = worst.max(if m > 0.0 { (p - m) / m } else { p });
            }
        }
    }
    worst
}
