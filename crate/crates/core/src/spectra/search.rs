//! Multiplier searches. All three algorithms share an [`Engine`] holding the
//! whitened channel of every tone, a warm-start cache and the current
//! multipliers. Tones are evaluated in parallel; sums over tones are always
//! formed sequentially in tone order.
//!
//! One-dimensional searches run in the water level `x = 1/λ`, where power
//! is non-decreasing and close to piecewise linear.
//!
//! Mask prices are carried per tone as a level `ν_{n,i}`; the effective
//! diagonal is `Λ_{n,i} = max(λ_n, ν_{n,i}, λ_floor)` and the reported price
//! is `μ_{n,i} = max(0, ν_{n,i} - λ_n)`. A mask-bound tone then keeps its
//! level while `λ_n` moves below it.

use rayon::prelude::*;

use super::root::{solve_increasing, Point};
use super::tone::PreparedTone;
use super::{mask_excess, power_residuals, Allocation, Diagnostics, Multipliers, SolverOptions};
use crate::binder::{ConstraintMode, Scenario};
use crate::error::{Error, Result};
use crate::numlin::HermitianPsd;

/// Inner passes over the lines of one tone when fitting mask prices.
const MASK_PASSES: usize = 32;
/// Bracket doublings before jumping straight to `λ_floor`.
const EXPANSIONS: usize = 3;

struct Slot {
    prep: PreparedTone,
    nu: Vec<f64>,
    mask: Vec<f64>,
    key: Vec<f64>,
    phi: Vec<f64>,
}

impl Slot {
    fn level(&self, lam: &[f64], floor: f64) -> Vec<f64> {
        lam.iter().zip(&self.nu).map(|(&l, &v)| l.max(v).max(floor)).collect()
    }

    fn eval(&mut self, lam: &[f64], floor: f64, gamma: f64) -> Result<()> {
        let key = self.level(lam, floor);
        if key != self.key {
            self.phi = self.prep.eval(&key, gamma)?.phi_diag;
            self.key = key;
        }
        Ok(())
    }

    fn phi_at(&mut self, n: usize, x: f64, lam: &[f64], floor: f64, gamma: f64) -> Result<f64> {
        self.nu[n] = 1.0 / x;
        self.eval(lam, floor, gamma)?;
        Ok(self.phi[n])
    }

    /// Moves the mask prices of this tone until every line sits at or under
    /// its mask and every priced line sits on it.
    fn fit_masks(&mut self, lam: &[f64], gamma: f64, opts: &SolverOptions) -> Result<()> {
        let floor = opts.lambda_floor;
        if self.prep.dead {
            return Ok(());
        }
        self.eval(lam, floor, gamma)?;
        for _ in 0..MASK_PASSES {
            let mut changed = false;
            for n in 0..lam.len() {
                let m = self.mask[n];
                if !m.is_finite() {
                    continue;
                }
                let tol = 0.5 * opts.eps_mask * m;
                let base = lam[n].max(floor);
                let phi = self.phi[n];
                if phi > m + tol {
                    let mut hi = Point { x: 1.0 / base.max(self.nu[n]), p: phi };
                    let mut lo = None;
                    for _ in 0..opts.max_bisect {
                        let x = 0.5 * hi.x;
                        let p = self.phi_at(n, x, lam, floor, gamma)?;
                        if p <= m {
                            lo = Some(Point { x, p });
                            break;
                        }
                        hi = Point { x, p };
                    }
                    let lo = lo.ok_or(Error::NoConvergence { what: "mask bracket", iterations: opts.max_bisect })?;
                    let r =
                        solve_increasing(|x| self.phi_at(n, x, lam, floor, gamma), lo, hi, m, tol, opts.max_bisect)?;
                    self.phi_at(n, r.x, lam, floor, gamma)?;
                    changed = true;
                } else if self.nu[n] > base && phi < m - tol {
                    let lo = Point { x: 1.0 / self.nu[n], p: phi };
                    self.nu[n] = 0.0;
                    self.eval(lam, floor, gamma)?;
                    changed = true;
                    if self.phi[n] <= m + tol {
                        continue;
                    }
                    let hi = Point { x: 1.0 / base, p: self.phi[n] };
                    let r =
                        solve_increasing(|x| self.phi_at(n, x, lam, floor, gamma), lo, hi, m, tol, opts.max_bisect)?;
                    self.phi_at(n, r.x, lam, floor, gamma)?;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(())
    }
}

struct Engine {
    slots: Vec<Slot>,
    lam: Vec<f64>,
    floor: f64,
    gamma: f64,
    passes: usize,
}

impl Engine {
    fn new(s: &Scenario, opts: &SolverOptions, with_masks: bool) -> Result<Self> {
        let n = s.n_lines();
        let preps: Vec<Result<PreparedTone>> = s.tones().par_iter().map(PreparedTone::new).collect();
        let slots = preps
            .into_iter()
            .enumerate()
            .map(|(i, prep)| {
                let mask =
                    if with_masks { s.mask().iter().map(|row| row[i]).collect() } else { vec![f64::INFINITY; n] };
                Ok(Slot { prep: prep?, nu: vec![0.0; n], mask, key: Vec::new(), phi: vec![0.0; n] })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Engine { slots, lam: vec![1.0; n], floor: opts.lambda_floor, gamma: s.gamma(), passes: 0 })
    }

    fn eval_all(&mut self) -> Result<()> {
        let Engine { slots, lam, floor, gamma, .. } = self;
        let results: Vec<Result<()>> = slots.par_iter_mut().map(|s| s.eval(lam, *floor, *gamma)).collect();
        self.passes += 1;
        results.into_iter().collect()
    }

    fn fit_masks(&mut self, opts: &SolverOptions) -> Result<()> {
        let Engine { slots, lam, gamma, .. } = self;
        let results: Vec<Result<()>> = slots.par_iter_mut().map(|s| s.fit_masks(lam, *gamma, opts)).collect();
        self.passes += 1;
        results.into_iter().collect()
    }

    fn line_power(&self, n: usize) -> f64 {
        self.slots.iter().map(|s| s.phi[n]).sum()
    }

    fn powers(&self) -> Vec<f64> {
        (0..self.lam.len()).map(|n| self.line_power(n)).collect()
    }

    fn total_power(&self) -> f64 {
        self.powers().iter().sum()
    }

    fn total_at(&mut self, x: f64) -> Result<f64> {
        self.lam.fill(1.0 / x);
        self.eval_all()?;
        Ok(self.total_power())
    }

    fn line_at(&mut self, n: usize, x: f64) -> Result<f64> {
        self.lam[n] = 1.0 / x;
        self.eval_all()?;
        Ok(self.line_power(n))
    }

    /// Smallest common multiplier at which no tone carries power.
    fn zero_power_level(&self) -> Result<f64> {
        let levels: Vec<Result<f64>> = self.slots.par_iter().map(|s| s.prep.zero_power_level(self.gamma)).collect();
        levels.into_iter().try_fold(0.0f64, |acc, l| Ok(acc.max(l?)))
    }

    fn masks_ok(&self, eps_mask: f64) -> bool {
        self.slots.iter().all(|s| {
            (0..self.lam.len()).all(|n| {
                let m = s.mask[n];
                let priced = s.nu[n] > self.lam[n].max(self.floor);
                s.phi[n] <= m * (1.0 + eps_mask) && (!priced || s.phi[n] >= m * (1.0 - eps_mask))
            })
        })
    }

    /// Cold per-tone solves at the final multipliers.
    fn finalize(
        &self,
        s: &Scenario,
        algo: &str,
        mode: ConstraintMode,
        iterations: usize,
        converged: bool,
    ) -> Result<Allocation> {
        let (n, nc) = (s.n_lines(), s.n_tones());
        let mut mu = vec![vec![0.0; nc]; n];
        for (i, slot) in self.slots.iter().enumerate() {
            for k in 0..n {
                if slot.nu[k] > self.lam[k].max(self.floor) {
                    mu[k][i] = slot.nu[k] - self.lam[k];
                }
            }
        }
        let multipliers = Multipliers { lambda: self.lam.clone(), mu };
        let sols: Vec<Result<_>> = self
            .slots
            .par_iter()
            .enumerate()
            .map(|(i, slot)| {
                if slot.prep.dead {
                    Ok(None)
                } else {
                    slot.prep.solve(&multipliers.effective(i, self.floor), self.gamma).map(Some)
                }
            })
            .collect();
        let mut phi = Vec::with_capacity(nc);
        let mut b_nats = Vec::with_capacity(nc);
        let mut line_nats = vec![vec![0.0; nc]; n];
        for (i, sol) in sols.into_iter().enumerate() {
            match sol? {
                Some(sol) => {
                    for (k, &r) in sol.stream_nats.iter().enumerate() {
                        line_nats[k][i] = r;
                    }
                    b_nats.push(sol.b_nats);
                    phi.push(sol.phi);
                }
                None => {
                    b_nats.push(0.0);
                    phi.push(HermitianPsd::zeros(n));
                }
            }
        }
        let diag = Diagnostics { iterations, evaluations: self.passes, converged, ..Default::default() };
        let mut a = Allocation::assemble(n, s.f_sym(), algo, mode, multipliers, phi, b_nats, line_nats, diag);
        a.diagnostics.power_residuals = power_residuals(s, mode, &a.per_modem_power, &a.multipliers.lambda, self.floor);
        a.diagnostics.mask_residual = if mode == ConstraintMode::PerModemMask { mask_excess(s, &a.psd) } else { 0.0 };
        Ok(a)
    }
}

struct Search {
    iterations: usize,
    converged: bool,
}

/// Common-multiplier search for the total budget. Leaves the engine
/// evaluated at the returned level.
fn total_power_search(e: &mut Engine, target: f64, opts: &SolverOptions) -> Result<Search> {
    let (n, nc) = (e.lam.len(), e.slots.len());
    let lam_zero = e.zero_power_level()? * (1.0 + 1e-12);
    if lam_zero == 0.0 {
        // nothing can carry power
        e.lam.fill(if target > 0.0 { (n * nc.max(1)) as f64 / target } else { opts.lambda_floor });
        e.eval_all()?;
        return Ok(Search { iterations: 0, converged: true });
    }
    if target == 0.0 {
        e.lam.fill(lam_zero);
        e.eval_all()?;
        return Ok(Search { iterations: 0, converged: true });
    }
    let x_zero = 1.0 / lam_zero;
    let mut lo = Point { x: x_zero, p: 0.0 };
    let mut x = (target / (n * nc) as f64).max(2.0 * x_zero);
    let mut hi = None;
    let mut iterations = 0;
    for _ in 0..opts.max_outer {
        iterations += 1;
        let p = e.total_at(x)?;
        if p >= target {
            hi = Some(Point { x, p });
            break;
        }
        lo = Point { x, p };
        x *= 2.0;
    }
    let Some(hi) = hi else {
        e.total_at(lo.x)?;
        return Ok(Search { iterations, converged: false });
    };
    let tol = 0.5 * opts.eps_power * target;
    let r = solve_increasing(|x| e.total_at(x), lo, hi, target, tol, opts.max_bisect)?;
    e.total_at(r.x)?;
    Ok(Search { iterations: iterations + r.evals, converged: r.converged })
}

/// Root search on one line's multiplier with the others fixed. Returns
/// false if the search hit its caps.
fn line_search(e: &mut Engine, n: usize, target: f64, opts: &SolverOptions) -> Result<bool> {
    let x_max = 1.0 / opts.lambda_floor;
    let tol = 0.5 * opts.eps_power * target;
    let cur = Point { x: 1.0 / e.lam[n], p: e.line_power(n) };
    if (cur.p - target).abs() <= tol {
        return Ok(true);
    }
    let (lo, hi) = if cur.p < target {
        let mut lo = cur;
        let mut hi = None;
        for k in 0..=EXPANSIONS {
            let x = if k < EXPANSIONS { (2.0 * lo.x).min(x_max) } else { x_max };
            if x <= lo.x {
                break;
            }
            let p = e.line_at(n, x)?;
            if p >= target {
                hi = Some(Point { x, p });
                break;
            }
            lo = Point { x, p };
        }
        match hi {
            Some(hi) => (lo, hi),
            None => {
                // slack line
                e.lam[n] = opts.lambda_floor;
                e.eval_all()?;
                return Ok(true);
            }
        }
    } else {
        let mut hi = cur;
        let mut lo = None;
        for _ in 0..opts.max_bisect {
            let x = 0.5 * hi.x;
            let p = e.line_at(n, x)?;
            if p <= target {
                lo = Some(Point { x, p });
                break;
            }
            hi = Point { x, p };
        }
        match lo {
            Some(lo) => (lo, hi),
            None => return Ok(false),
        }
    };
    let r = solve_increasing(|x| e.line_at(n, x), lo, hi, target, tol, opts.max_bisect)?;
    e.lam[n] = (1.0 / r.x).max(opts.lambda_floor);
    e.eval_all()?;
    Ok(r.converged)
}

fn line_ok(e: &Engine, n: usize, budget: f64, eps: f64) -> bool {
    let p = e.line_power(n);
    (p - budget).abs() <= eps * budget || (e.lam[n] <= e.floor && p <= budget * (1.0 + eps))
}

fn lines_ok(e: &Engine, budgets: &[f64], eps: f64) -> bool {
    budgets.iter().enumerate().all(|(n, &b)| line_ok(e, n, b, eps))
}

/// One Gauss-Seidel sweep of line searches over lines that are off budget.
fn lambda_sweep(e: &mut Engine, budgets: &[f64], opts: &SolverOptions) -> Result<()> {
    for (n, &b) in budgets.iter().enumerate() {
        if !line_ok(e, n, b, opts.eps_power) {
            line_search(e, n, b, opts)?;
        }
    }
    Ok(())
}

fn positive_budgets(s: &Scenario) -> Result<Vec<f64>> {
    let p = s.p_tot().to_vec();
    if let Some(n) = p.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput(format!("per-modem search needs positive budgets, line {n} has {}", p[n])));
    }
    Ok(p)
}

/// Single total-power budget `Σ_n P_n`: one common multiplier found by
/// bracketing and a safeguarded root search.
pub fn algo1_total_power(s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
    opts.validate()?;
    let mut e = Engine::new(s, opts, false)?;
    let r = total_power_search(&mut e, s.total_budget(), opts)?;
    e.finalize(s, "algo1", ConstraintMode::Total, r.iterations, r.converged)
}

/// Per-modem budgets: cyclic coordinate search over the line multipliers,
/// started from the common multiplier of the total-power problem.
pub fn algo2_per_modem(s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
    opts.validate()?;
    let budgets = positive_budgets(s)?;
    let mut e = Engine::new(s, opts, false)?;
    total_power_search(&mut e, s.total_budget(), opts)?;
    let mut converged = lines_ok(&e, &budgets, opts.eps_power);
    let mut outer = 0;
    while !converged && outer < opts.max_outer {
        outer += 1;
        lambda_sweep(&mut e, &budgets, opts)?;
        converged = lines_ok(&e, &budgets, opts.eps_power);
    }
    e.finalize(s, "algo2", ConstraintMode::PerModem, outer, converged)
}

/// Per-modem budgets and spectral masks: line multiplier sweeps alternate
/// with per-tone mask price fits.
pub fn algo3_per_modem_mask(s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
    opts.validate()?;
    let budgets = positive_budgets(s)?;
    for (n, row) in s.mask().iter().enumerate() {
        for (tc, &m) in s.tones().iter().zip(row) {
            if m <= 0.0 && !tc.is_dead() {
                return Err(Error::InfeasibleMask { line: n, tone: tc.index });
            }
        }
    }
    let mut e = Engine::new(s, opts, true)?;
    total_power_search(&mut e, s.total_budget(), opts)?;
    e.fit_masks(opts)?;
    let done = |e: &Engine| lines_ok(e, &budgets, opts.eps_power) && e.masks_ok(opts.eps_mask);
    let mut converged = done(&e);
    let mut outer = 0;
    while !converged && outer < opts.max_outer {
        outer += 1;
        lambda_sweep(&mut e, &budgets, opts)?;
        e.fit_masks(opts)?;
        converged = done(&e);
    }
    e.finalize(s, "algo3", ConstraintMode::PerModemMask, outer, converged)
}

/// Solves the per-modem problem without masks, then scales each tone's
/// covariance so every line meets its mask: `Φ' = D Φ D` with
/// `D_nn = min(1, sqrt(mask / φ_n))`. Clipped power is not redistributed.
pub fn truncation_baseline(s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
    let base = algo2_per_modem(&s.without_mask(), opts)?;
    let n = s.n_lines();
    let gamma = s.gamma();
    let mask = s.mask();
    let per_tone: Vec<Result<(HermitianPsd, f64)>> = s
        .tones()
        .par_iter()
        .enumerate()
        .map(|(i, tc)| {
            let phi = &base.phi[i];
            let Some(clipped) = clip_to_mask(phi, |k| mask[k][i]) else {
                return Ok((phi.clone(), base.b_nats[i]));
            };
            let b = if tc.is_dead() { 0.0 } else { super::rate_whitened(&super::whiten(tc)?, &clipped, gamma)? };
            Ok((clipped, b))
        })
        .collect();
    let mut phi = Vec::with_capacity(s.n_tones());
    let mut b_nats = Vec::with_capacity(s.n_tones());
    for r in per_tone {
        let (p, b) = r?;
        phi.push(p);
        b_nats.push(b);
    }
    // keep each tone's split across lines, rescaled to the clipped rate
    let line_nats: Vec<Vec<f64>> = base
        .line_nats
        .iter()
        .map(|row| {
            row.iter()
                .zip(base.b_nats.iter().zip(&b_nats))
                .map(|(&r, (&b0, &b1))| if b0 > 0.0 { r * (b1 / b0) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut diag = base.diagnostics.clone();
    let a0 = Allocation::assemble(
        n,
        s.f_sym(),
        "truncation",
        ConstraintMode::PerModemMask,
        base.multipliers.clone(),
        phi,
        b_nats,
        line_nats,
        Diagnostics::default(),
    );
    diag.power_residuals = power_residuals(s, ConstraintMode::PerModem, &a0.per_modem_power, &[], 0.0);
    diag.mask_residual = mask_excess(s, &a0.psd);
    Ok(Allocation { diagnostics: diag, ..a0 })
}

/// `D Φ D` with `D_nn = min(1, sqrt(mask_n / φ_n))`; `None` when no line
/// exceeds its mask.
pub(crate) fn clip_to_mask(phi: &HermitianPsd, mask: impl Fn(usize) -> f64) -> Option<HermitianPsd> {
    let scale: Vec<f64> = (0..phi.dim())
        .map(|k| {
            let p = phi[(k, k)].re;
            if p > mask(k) {
                (mask(k) / p).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    if scale.iter().all(|&d| d == 1.0) {
        return None;
    }
    Some(HermitianPsd::from_lower(phi.as_matrix().scale_rows(&scale).scale_columns(&scale)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::CMatrix;
    use crate::spectra::{dual_value, kkt_audit};
    use num_complex::Complex64;

    fn scalar(gains_sq: &[f64], budget: f64) -> Scenario {
        let ch = gains_sq.iter().map(|&g| (CMatrix::from_real_diag(&[g.sqrt()]), CMatrix::identity(1))).collect();
        Scenario::from_matrices(ch, vec![budget], 0.0).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn symmetric_waterfilling() {
        let a = algo1_total_power(&scalar(&[1.0, 1.0], 2.0), &opts()).unwrap();
        assert!(a.converged());
        assert!((a.multipliers.lambda[0] - 0.5).abs() <= 1e-8);
        assert!((a.psd[0][0] - 1.0).abs() <= 1e-8 && (a.psd[0][1] - 1.0).abs() <= 1e-8);
        assert!((a.b_nats.iter().sum::<f64>() - 2.0 * 2f64.ln()).abs() <= 1e-8);
    }

    #[test]
    fn waterfilling_leaves_weak_tone_dark() {
        let a = algo1_total_power(&scalar(&[4.0, 1.0], 0.75), &opts()).unwrap();
        assert!((a.multipliers.lambda[0] - 1.0).abs() <= 1e-8);
        assert!((a.psd[0][0] - 0.75).abs() <= 1e-8);
        assert_eq!(a.psd[0][1], 0.0);
        assert!((a.b_nats.iter().sum::<f64>() - 4f64.ln()).abs() <= 1e-8);
    }

    #[test]
    fn zero_budget_gives_zero_allocation() {
        let a = algo1_total_power(&scalar(&[4.0, 1.0], 0.0), &opts()).unwrap();
        assert!(a.converged());
        assert_eq!(a.sum_rate, 0.0);
        assert!(a.psd[0].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn uncoupled_lines_waterfill_independently() {
        let ch = vec![
            (CMatrix::from_real_diag(&[2.0, 1.0]), CMatrix::identity(2)),
            (CMatrix::from_real_diag(&[1.0, 1.0]), CMatrix::identity(2)),
        ];
        let s = Scenario::from_matrices(ch, vec![0.75, 2.0], 0.0).unwrap();
        let a = algo2_per_modem(&s, &opts()).unwrap();
        assert!(a.converged());
        assert!((a.multipliers.lambda[0] - 1.0).abs() <= 1e-8, "{:?}", a.multipliers.lambda);
        assert!((a.multipliers.lambda[1] - 0.5).abs() <= 1e-8);
        assert!((a.per_modem_power[0] - 0.75).abs() <= 1e-9);
        assert!((a.per_modem_power[1] - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn circulant_per_modem_matches_total_power() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let h0 = CMatrix::from_rows(&[
            &[c(1.0, 0.0), c(0.2, 0.1), c(0.05, -0.02)],
            &[c(0.05, -0.02), c(1.0, 0.0), c(0.2, 0.1)],
            &[c(0.2, 0.1), c(0.05, -0.02), c(1.0, 0.0)],
        ])
        .unwrap();
        let ch = (0..4).map(|k| (h0.scale(c(1.0 / (1.0 + k as f64), 0.0)), CMatrix::identity(3).scale(c(0.01, 0.0))));
        let s = Scenario::from_matrices(ch.collect(), vec![1.0, 1.0, 1.0], 3.0).unwrap();
        let a1 = algo1_total_power(&s, &opts()).unwrap();
        let a2 = algo2_per_modem(&s, &opts()).unwrap();
        assert!(a2.converged());
        assert!((a1.sum_rate - a2.sum_rate).abs() <= 1e-8 * a1.sum_rate);
    }

    #[test]
    fn scalar_mask_binds_and_budget_is_slack() {
        let s = scalar(&[100.0], 1.0).with_mask_watts(vec![vec![Some(0.2)]]).unwrap();
        let a = algo3_per_modem_mask(&s, &opts()).unwrap();
        assert!(a.converged());
        assert!((a.psd[0][0] - 0.2).abs() <= 1e-9 * 0.2);
        assert_eq!(a.multipliers.lambda[0], opts().lambda_floor);
        let mu = a.multipliers.mu[0][0];
        assert!((mu + a.multipliers.lambda[0] - 100.0 / 21.0).abs() <= 1e-6, "mu {mu}");
        assert!((a.b_nats[0] - 21f64.ln()).abs() <= 1e-9);
        assert!(kkt_audit(&s, &a).unwrap().passes(1e-6));
    }

    #[test]
    fn two_masked_tones_share_price() {
        let s = scalar(&[100.0, 100.0], 1.0).with_mask_watts(vec![vec![Some(0.4), Some(0.4)]]).unwrap();
        let a = algo3_per_modem_mask(&s, &opts()).unwrap();
        assert!((a.psd[0][0] - 0.4).abs() <= 1e-9 && (a.psd[0][1] - 0.4).abs() <= 1e-9);
        assert_eq!(a.multipliers.lambda[0], opts().lambda_floor);
        assert!((a.multipliers.mu[0][0] - a.multipliers.mu[0][1]).abs() <= 1e-9);
    }

    #[test]
    fn infinite_masks_reduce_to_per_modem() {
        let ch = vec![
            (CMatrix::from_real_rows(&[&[1.0, 0.3], &[0.2, 0.8]]).unwrap(), CMatrix::identity(2).scale(0.05.into())),
            (CMatrix::from_real_rows(&[&[0.6, 0.1], &[0.25, 0.9]]).unwrap(), CMatrix::identity(2).scale(0.05.into())),
        ];
        let s = Scenario::from_matrices(ch, vec![1.0, 0.5], 0.0).unwrap();
        let a2 = algo2_per_modem(&s, &opts()).unwrap();
        let a3 = algo3_per_modem_mask(&s.with_mask_watts(vec![vec![None; 2]; 2]).unwrap(), &opts()).unwrap();
        assert!((a2.sum_rate - a3.sum_rate).abs() <= 1e-8 * a2.sum_rate);
        assert!(a3.multipliers.mu.iter().flatten().all(|&m| m == 0.0));
        let t = truncation_baseline(&s.with_mask_watts(vec![vec![None; 2]; 2]).unwrap(), &opts()).unwrap();
        assert_eq!(t.psd, a2.psd);
        assert_eq!(t.sum_rate, a2.sum_rate);
    }

    #[test]
    fn truncation_scales_rows_and_columns() {
        let phi = HermitianPsd::from_lower(CMatrix::from_real_rows(&[&[0.5, 0.1], &[0.1, 0.1]]).unwrap());
        let masks = [0.2, f64::INFINITY];
        let out = clip_to_mask(&phi, |k| masks[k]).unwrap();
        assert!((out[(0, 0)].re - 0.2).abs() < 1e-15);
        assert_eq!(out[(1, 1)].re, 0.1);
        assert!((out[(1, 0)].re - 0.1 * 0.4f64.sqrt()).abs() < 1e-15);
        assert!(clip_to_mask(&phi, |_| 1.0).is_none());
    }

    #[test]
    fn zero_gap_at_the_optimum() {
        let s = scalar(&[4.0, 1.0, 0.3], 1.5);
        let a = algo1_total_power(&s, &opts()).unwrap();
        let primal: f64 = a.b_nats.iter().sum();
        let dual = dual_value(&s, &a.multipliers).unwrap();
        assert!((dual - primal).abs() <= 1e-6 * (1.0 + primal));
        let mut far = a.multipliers.clone();
        far.lambda[0] *= 10.0;
        assert!(dual_value(&s, &far).unwrap() > dual);
    }

    #[test]
    fn forced_non_convergence_returns_best_iterate() {
        let ch = vec![(CMatrix::from_real_rows(&[&[1.0, 0.4], &[0.3, 0.9]]).unwrap(), CMatrix::identity(2))];
        let s = Scenario::from_matrices(ch, vec![1.0, 3.0], 0.0).unwrap();
        let o = SolverOptions { eps_power: 1e-18, max_outer: 1, ..opts() };
        let a = algo2_per_modem(&s, &o).unwrap();
        assert!(!a.converged());
        assert_eq!(a.n_tones(), 1);
    }
}
