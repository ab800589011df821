//! One-sided baselines: the diagonalizing precoder (downstream) and the
//! zero-forcing receiver (upstream). Both reduce each tone to independent
//! scalar channels that are waterfilled line by line.

use rayon::prelude::*;

use crate::binder::{ConstraintMode, Scenario};
use crate::error::{Error, Result};
use crate::numlin::{cholesky_lower, invert, solve_lower, CMatrix, HermitianPsd};
use crate::spectra::{
    mask_excess, power_residuals, solve_increasing, Allocation, Diagnostics, Multipliers, Point, SolverOptions,
};

/// Budget-correction rounds of the precoder baseline.
const DP_ROUNDS: usize = 8;
/// Pivot threshold, relative to the largest entry, below which a channel
/// matrix counts as singular.
const SINGULAR_REL: f64 = 1e-12;

/// Capped scalar waterfilling: `p_i = clamp(x − 1/g_i, 0, cap_i)` with the
/// level `x` set so `Σ p = budget`, or every tone at its cap when the caps
/// fit inside the budget. Returns the powers and the multiplier `1/x`
/// (`floor` when the budget is slack).
pub(crate) fn waterfill_capped(
    gains: &[f64],
    caps: &[f64],
    budget: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let fill = |x: f64| -> Vec<f64> {
        gains.iter().zip(caps).map(|(&g, &c)| if g > 0.0 { (x - 1.0 / g).clamp(0.0, c) } else { 0.0 }).collect()
    };
    let usable: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0 && caps[i] > 0.0).collect();
    if budget <= 0.0 || usable.is_empty() {
        return Ok((vec![0.0; gains.len()], opts.lambda_floor));
    }
    let cap_sum: f64 = usable.iter().map(|&i| caps[i]).sum();
    if cap_sum <= budget {
        return Ok((fill(f64::INFINITY), opts.lambda_floor));
    }
    let total = |x: f64| -> Result<f64> { Ok(fill(x).iter().sum()) };
    let lo_x = usable.iter().map(|&i| 1.0 / gains[i]).fold(f64::INFINITY, f64::min);
    let mut hi_x = usable.iter().map(|&i| 1.0 / gains[i]).fold(0.0, f64::max) + budget;
    let mut hi_p = total(hi_x)?;
    while hi_p < budget {
        hi_x *= 2.0;
        hi_p = total(hi_x)?;
    }
    let r = solve_increasing(
        total,
        Point { x: lo_x, p: 0.0 },
        Point { x: hi_x, p: hi_p },
        budget,
        0.25 * opts.eps_power * budget,
        opts.max_bisect,
    )?;
    let mut p = fill(r.x);
    // the level search stops within tolerance; never exceed the budget
    let sum: f64 = p.iter().sum();
    if sum > budget {
        p.iter_mut().for_each(|v| *v *= budget / sum);
    }
    Ok((p, 1.0 / r.x))
}

fn masked_mode(s: &Scenario) -> ConstraintMode {
    if s.has_finite_mask() {
        ConstraintMode::PerModemMask
    } else {
        ConstraintMode::PerModem
    }
}

/// Per-line waterfilling on fixed scalar gains `gains[n][i]`, one budget per line.
fn waterfill_lines(
    s: &Scenario,
    gains: &[Vec<f64>],
    budgets: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let out: Vec<Result<(Vec<f64>, f64)>> =
        (0..s.n_lines()).into_par_iter().map(|n| waterfill_capped(&gains[n], &s.mask()[n], budgets[n], opts)).collect();
    let mut p = Vec::with_capacity(s.n_lines());
    let mut lam = Vec::with_capacity(s.n_lines());
    for r in out {
        let (pn, ln) = r?;
        p.push(pn);
        lam.push(ln);
    }
    Ok((p, lam))
}

fn finish(
    s: &Scenario,
    algo: &str,
    lambda: Vec<f64>,
    phi: Vec<HermitianPsd>,
    line_nats: Vec<Vec<f64>>,
    iterations: usize,
    skipped: Vec<usize>,
) -> Allocation {
    let (n, nc) = (s.n_lines(), s.n_tones());
    let mode = masked_mode(s);
    let b_nats = (0..nc).map(|i| line_nats.iter().map(|row| row[i]).sum()).collect();
    let multipliers = Multipliers { lambda, mu: vec![vec![0.0; nc]; n] };
    let diag = Diagnostics { iterations, converged: true, skipped_tones: skipped, ..Default::default() };
    let mut a = Allocation::assemble(n, s.f_sym(), algo, mode, multipliers, phi, b_nats, line_nats, diag);
    a.diagnostics.power_residuals = power_residuals(s, ConstraintMode::PerModem, &a.per_modem_power, &[], 0.0);
    a.diagnostics.mask_residual = mask_excess(s, &a.psd);
    a
}

/// Diagonalizing precoder `F = H^{-1} diag(H)`. Line `n` sees gain
/// `|H_nn|²/(Γ R_nn)`; intended powers are waterfilled per line, then the
/// precoder output PSDs are checked and backed off per tone (masks) and
/// globally (budgets) so the result is feasible. Singular tones are skipped
/// with zero rate and listed in the diagnostics.
pub fn dp_baseline(s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
    opts.validate()?;
    let (n, nc) = (s.n_lines(), s.n_tones());
    let gamma = s.gamma();
    // per tone: precoder (None when skipped) and per-line gains
    let prep: Vec<(Option<CMatrix>, Vec<f64>)> = s
        .tones()
        .par_iter()
        .map(|tc| {
            if tc.is_dead() {
                return (None, vec![0.0; n]);
            }
            match invert(&tc.h, SINGULAR_REL) {
                Some(h_inv) => {
                    let f = h_inv.matmul(&CMatrix::from_diag(&tc.h.diag()));
                    let g = (0..n).map(|k| tc.h[(k, k)].norm_sqr() / (gamma * tc.r[(k, k)].re)).collect();
                    (Some(f), g)
                }
                None => (None, vec![0.0; n]),
            }
        })
        .collect();
    let skipped: Vec<usize> =
        s.tones().iter().zip(&prep).filter(|(tc, p)| p.0.is_none() && !tc.is_dead()).map(|(tc, _)| tc.index).collect();
    let gains: Vec<Vec<f64>> = (0..n).map(|k| prep.iter().map(|p| p.1[k]).collect()).collect();
    // |F_nm|² per tone, for the output PSDs
    let f_sq: Vec<Option<Vec<f64>>> =
        prep.iter().map(|(f, _)| f.as_ref().map(|f| f.as_slice().iter().map(|z| z.norm_sqr()).collect())).collect();
    let output = |p: &[Vec<f64>], i: usize| -> Vec<f64> {
        match &f_sq[i] {
            Some(fs) => (0..n).map(|r| (0..n).map(|m| fs[r * n + m] * p[m][i]).sum()).collect(),
            None => vec![0.0; n],
        }
    };

    let budgets = s.p_tot().to_vec();
    let mut eff = budgets.clone();
    let mut rounds = 0;
    let (mut p, mut lambda);
    let mut backoff;
    loop {
        rounds += 1;
        (p, lambda) = waterfill_lines(s, &gains, &eff, opts)?;
        backoff = (0..nc)
            .map(|i| {
                let t = output(&p, i);
                (0..n).map(|k| if t[k] > s.mask()[k][i] { s.mask()[k][i] / t[k] } else { 1.0 }).fold(1.0, f64::min)
            })
            .collect::<Vec<f64>>();
        let used: Vec<f64> =
            (0..n).map(|k| (0..nc).map(|i| backoff[i] * output(&p, i)[k]).sum::<f64>()).collect::<Vec<_>>();
        let over: Vec<bool> = (0..n).map(|k| used[k] > budgets[k] * (1.0 + opts.eps_power)).collect();
        if !over.iter().any(|&o| o) || rounds >= DP_ROUNDS {
            // a single global scale keeps every line inside its budget
            let scale = (0..n).filter(|&k| used[k] > 0.0).map(|k| budgets[k] / used[k]).fold(1.0, f64::min);
            backoff.iter_mut().for_each(|b| *b *= scale);
            break;
        }
        for k in 0..n {
            if over[k] {
                eff[k] *= budgets[k] / used[k];
            }
        }
    }
    let mut phi = Vec::with_capacity(nc);
    let mut line_nats = vec![vec![0.0; nc]; n];
    for i in 0..nc {
        match &prep[i].0 {
            Some(f) => {
                let sq: Vec<f64> = (0..n).map(|k| (backoff[i] * p[k][i]).sqrt()).collect();
                let b = f.scale_columns(&sq);
                phi.push(HermitianPsd::from_lower(b.matmul(&b.adjoint())));
                for k in 0..n {
                    line_nats[k][i] = (backoff[i] * p[k][i] * gains[k][i]).ln_1p();
                }
            }
            None => phi.push(HermitianPsd::zeros(n)),
        }
    }
    Ok(finish(s, "dp", lambda, phi, line_nats, rounds, skipped))
}

/// `[(G^H G)^{-1}]_nn` for the whitened channel `G`, or `None` when `G`
/// is rank deficient.
pub(crate) fn zf_noise(g: &CMatrix) -> Option<Vec<f64>> {
    let n = g.rows();
    let gram = g.adjoint().matmul(g);
    let c = cholesky_lower(&gram).ok()?;
    let max_piv = (0..n).map(|k| c[(k, k)].re).fold(0.0, f64::max);
    if (0..n).any(|k| c[(k, k)].re <= SINGULAR_REL.sqrt() * max_piv) {
        return None;
    }
    let c_inv = solve_lower(&c, &CMatrix::identity(n)).ok()?;
    Some((0..n).map(|col| (0..n).map(|r| c_inv[(r, col)].norm_sqr()).sum()).collect())
}

/// Zero-forcing receiver: post-detection noise `ν_n = [(H^H R^{-1} H)^{-1}]_nn`,
/// per-line rate `ln(1 + s_n/(Γ ν_n))`, powers waterfilled per line under
/// its budget and masks. Transmitters are uncoordinated, so `Φ = diag(s)`.
pub fn zf_baseline(s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
    opts.validate()?;
    let (n, nc) = (s.n_lines(), s.n_tones());
    let gamma = s.gamma();
    let nu: Vec<Result<Vec<f64>>> = s
        .tones()
        .par_iter()
        .map(|tc| {
            if tc.is_dead() {
                return Ok(vec![f64::INFINITY; n]);
            }
            let g = crate::spectra::whiten(tc)?;
            zf_noise(&g).ok_or(Error::RankDeficient { tone: tc.index })
        })
        .collect();
    let nu = nu.into_iter().collect::<Result<Vec<_>>>()?;
    let gains: Vec<Vec<f64>> = (0..n).map(|k| nu.iter().map(|v| 1.0 / (gamma * v[k])).collect()).collect();
    let (p, lambda) = waterfill_lines(s, &gains, s.p_tot(), opts)?;
    let phi = (0..nc)
        .map(|i| HermitianPsd::from_lower(CMatrix::from_real_diag(&p.iter().map(|row| row[i]).collect::<Vec<_>>())))
        .collect();
    let line_nats = (0..n).map(|k| (0..nc).map(|i| (p[k][i] * gains[k][i]).ln_1p()).collect()).collect();
    Ok(finish(s, "zf", lambda, phi, line_nats, 1, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{algo2_per_modem, algo3_per_modem_mask};

    #[test]
    fn capped_waterfilling_cases() {
        let o = SolverOptions::default();
        let (p, lam) = waterfill_capped(&[4.0, 1.0], &[f64::INFINITY; 2], 0.75, &o).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-10 && p[1] == 0.0);
        assert!((lam - 1.0).abs() < 1e-9);
        let (p, lam) = waterfill_capped(&[100.0, 100.0], &[0.4, 0.4], 1.0, &o).unwrap();
        assert_eq!(p, vec![0.4, 0.4]);
        assert_eq!(lam, o.lambda_floor);
        let (p, _) = waterfill_capped(&[1.0, 1.0, 0.0], &[0.3, f64::INFINITY, 1.0], 2.0, &o).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 1.7).abs() < 1e-9 && p[2] == 0.0);
    }

    #[test]
    fn zf_noise_examples() {
        assert_eq!(zf_noise(&CMatrix::identity(2)).unwrap(), vec![1.0, 1.0]);
        let nu = zf_noise(&CMatrix::from_real_diag(&[2.0, 1.0])).unwrap();
        assert!((nu[0] - 0.25).abs() < 1e-15 && (nu[1] - 1.0).abs() < 1e-15);
        assert!(zf_noise(&CMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap()).is_none());
    }

    fn diag_scenario() -> Scenario {
        let ch = vec![
            (CMatrix::from_real_diag(&[2.0, 1.0]), CMatrix::identity(2)),
            (CMatrix::from_real_diag(&[1.0, 1.5]), CMatrix::identity(2)),
        ];
        Scenario::from_matrices(ch, vec![0.75, 2.0], 0.0).unwrap()
    }

    #[test]
    fn diagonal_channel_dp_is_per_line_waterfilling() {
        let s = diag_scenario();
        let dp = dp_baseline(&s, &SolverOptions::default()).unwrap();
        let a2 = algo2_per_modem(&s, &SolverOptions::default()).unwrap();
        assert!((dp.sum_rate - a2.sum_rate).abs() <= 1e-8 * a2.sum_rate);
        for k in 0..2 {
            for i in 0..2 {
                assert!((dp.psd[k][i] - a2.psd[k][i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn singular_tone_is_skipped() {
        let ch = vec![
            (CMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap(), CMatrix::identity(2)),
            (CMatrix::from_real_diag(&[1.0, 1.0]), CMatrix::identity(2)),
        ];
        let s = Scenario::from_matrices(ch, vec![1.0, 1.0], 0.0).unwrap();
        let dp = dp_baseline(&s, &SolverOptions::default()).unwrap();
        assert_eq!(dp.diagnostics.skipped_tones, vec![0]);
        assert_eq!(dp.b_nats[0], 0.0);
        assert!(matches!(zf_baseline(&s, &SolverOptions::default()), Err(Error::RankDeficient { tone: 0 })));
    }

    #[test]
    fn coupled_baselines_are_feasible_and_dominated() {
        let h = |a: f64, b: f64| CMatrix::from_real_rows(&[&[1.0, a], &[b, 0.8]]).unwrap();
        let r = CMatrix::identity(2).scale(0.02.into());
        let ch = vec![(h(0.3, 0.2), r.clone()), (h(0.1, 0.4), r.clone()), (h(0.25, 0.05), r)];
        let s = Scenario::from_matrices(ch, vec![0.5, 0.5], 0.0).unwrap();
        let masked =
            s.with_mask_watts(vec![vec![Some(0.2), Some(0.3), None], vec![None, Some(0.15), Some(0.2)]]).unwrap();
        let o = SolverOptions::default();
        let a3 = algo3_per_modem_mask(&masked, &o).unwrap();
        for b in [dp_baseline(&masked, &o).unwrap(), zf_baseline(&masked, &o).unwrap()] {
            assert!(b.diagnostics.power_residuals.iter().all(|&r| r <= o.eps_power), "{}", b.algo);
            assert!(b.diagnostics.mask_residual <= o.eps_mask, "{}", b.algo);
            assert!(b.sum_rate <= a3.sum_rate, "{} {} > {}", b.algo, b.sum_rate, a3.sum_rate);
        }
    }
}
