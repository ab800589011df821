//! Acceptance checks runnable from the command line. The quick set uses
//! small instances; the full set adds the default 8-line scenarios.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::ThreadPoolBuilder;

use super::{default_scenario, run_sweep, sweep_csv, Algo, ExperimentConfig, SweepRow};
use crate::binder::{
    BandPlan, Direction, Scenario, ToneChannel, DEFAULT_AWGN_DBM_HZ, DEFAULT_COUPLING_LENGTH_M, DEFAULT_DELTA_F_HZ,
    DEFAULT_F_MAX_HZ, DEFAULT_F_SYM_HZ, DEFAULT_LOOP_LENGTH_M, DEFAULT_N_LINES, DEFAULT_P_LINE_DBM,
    VDSL2_DOWNSTREAM_BANDS, VDSL2_UPSTREAM_BANDS,
};
use crate::error::{Error, Result};
use crate::numlin::{CMatrix, HermitianPsd};
use crate::spectra::{
    algo1_total_power, algo2_per_modem, algo3_per_modem_mask, kkt_audit, rate_of_cov, tone_solve, SolverOptions,
};
use crate::structures::{make_txrx, monte_carlo_siso};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    /// `None` when the check was not run.
    pub passed: Option<bool>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(id: u32, name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckOutcome { id, name, passed: Some(passed), detail },
            Err(e) => CheckOutcome { id, name, passed: Some(false), detail: format!("error: {e}") },
        }
    }

    fn skipped(id: u32, name: &'static str, why: &str) -> Self {
        CheckOutcome { id, name, passed: None, detail: why.into() }
    }

    pub fn line(&self) -> String {
        let tag = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        format!("[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_tone(rng: &mut ChaCha8Rng, n: usize) -> Result<ToneChannel> {
    let h = CMatrix::from_fn(n, n, |_, _| cn(rng));
    let a = CMatrix::from_fn(n, n, |_, _| cn(rng));
    let r = a.matmul(&a.adjoint()).add(&CMatrix::identity(n).scale(0.1.into()));
    ToneChannel::new(0, 1e6, h, HermitianPsd::from_lower(r))
}

fn determinant_identity() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut count = 0;
    for &n in &[1usize, 2, 4, 8] {
        for _ in 0..50 {
            let tc = random_tone(&mut rng, n)?;
            let lam: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
            let gamma = 1.0 + 9.0 * rng.random::<f64>();
            let sol = tone_solve(&tc, &lam, gamma)?;
            let b = rate_of_cov(&tc, &sol.phi, gamma)?;
            worst = worst.max((b - sol.b_nats).abs() / sol.b_nats.abs().max(1e-300));
            count += 1;
        }
    }
    Ok((worst <= 1e-9, format!("{count} tones, max relative error {worst:.2e}")))
}

fn scalar(gains_sq: &[f64], budget: f64) -> Result<Scenario> {
    let ch = gains_sq.iter().map(|&g| (CMatrix::from_real_diag(&[g.sqrt()]), CMatrix::identity(1))).collect();
    Scenario::from_matrices(ch, vec![budget], 0.0)
}

fn waterfilling() -> Result<(bool, String)> {
    let opts = SolverOptions::default();
    let a = algo1_total_power(&scalar(&[1.0, 1.0], 2.0)?, &opts)?;
    let b = algo1_total_power(&scalar(&[4.0, 1.0], 0.75)?, &opts)?;
    let dl = (a.multipliers.lambda[0] - 0.5).abs().max((b.multipliers.lambda[0] - 1.0).abs());
    let ds = (a.psd[0][0] - 1.0)
        .abs()
        .max((a.psd[0][1] - 1.0).abs())
        .max((b.psd[0][0] - 0.75).abs())
        .max(b.psd[0][1].abs());
    Ok((dl <= 1e-8 && ds <= 1e-8, format!("|dlambda| {dl:.1e}, |ds| {ds:.1e}")))
}

fn reductions() -> Result<(bool, String)> {
    let opts = SolverOptions::default();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h0 = CMatrix::from_rows(&[
        &[c(1.0, 0.0), c(0.3, 0.1), c(0.1, -0.05)],
        &[c(0.1, -0.05), c(1.0, 0.0), c(0.3, 0.1)],
        &[c(0.3, 0.1), c(0.1, -0.05), c(1.0, 0.0)],
    ])?;
    let ch = (0..6).map(|k| (h0.scale(c(1.0 / (1.0 + k as f64), 0.0)), CMatrix::identity(3).scale(c(0.01, 0.0))));
    let s = Scenario::from_matrices(ch.collect(), vec![1.0; 3], 3.0)?;
    let a1 = algo1_total_power(&s, &opts)?;
    let a2 = algo2_per_modem(&s, &opts)?;
    let circ = (a1.sum_rate - a2.sum_rate).abs() / a1.sum_rate;
    let unmasked = s.with_mask_watts(vec![vec![None; s.n_tones()]; 3])?;
    let a3 = algo3_per_modem_mask(&unmasked, &opts)?;
    let inf = (a3.sum_rate - a2.sum_rate).abs() / a2.sum_rate;
    Ok((circ <= 1e-8 && inf <= 1e-8, format!("circulant {circ:.1e}, infinite masks {inf:.1e} (relative)")))
}

fn constants() -> Result<(bool, String)> {
    let ds = BandPlan::vdsl2(Direction::Downstream);
    let ok = DEFAULT_AWGN_DBM_HZ == -140.0
        && DEFAULT_P_LINE_DBM == 14.5
        && DEFAULT_DELTA_F_HZ == 4312.5
        && DEFAULT_F_SYM_HZ == 4000.0
        && DEFAULT_F_MAX_HZ == 12e6
        && DEFAULT_N_LINES == 8
        && DEFAULT_LOOP_LENGTH_M == 800.0
        && DEFAULT_COUPLING_LENGTH_M == 400.0
        && VDSL2_DOWNSTREAM_BANDS == [[138e3, 3.75e6], [5.2e6, 8.5e6]]
        && VDSL2_UPSTREAM_BANDS == [[25e3, 138e3], [3.75e6, 5.2e6], [8.5e6, 12e6]]
        && ds == BandPlan::vdsl2_downstream();
    Ok((ok, "AWGN, budget, spacing, symbol rate, band plans, binder geometry".into()))
}

fn monte_carlo() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tc = random_tone(&mut rng, 4)?;
    let lam = [0.2, 0.3, 0.25, 0.4];
    let sol = tone_solve(&tc, &lam, 2.0)?;
    let pair = make_txrx(&tc, &lam, &sol)?;
    let rep = monte_carlo_siso(&pair, &tc, &sol.s_tilde, 100_000, 9)?;
    let mut snr_err = 0.0f64;
    for (e, x) in rep.empirical_snr.iter().zip(&rep.expected_snr) {
        if *x > 0.0 {
            snr_err = snr_err.max((e - x).abs() / x);
        }
    }
    let ok = rep.max_cov_deviation <= 0.05 && snr_err <= 0.05;
    Ok((ok, format!("cov deviation {:.4}, SNR error {:.2}%", rep.max_cov_deviation, 100.0 * snr_err)))
}

fn kkt_default() -> Result<(bool, String)> {
    let s = default_scenario(Direction::Downstream)?;
    let opts = SolverOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for algo in [Algo::Algo1, Algo::Algo2, Algo::Algo3] {
        let start = std::time::Instant::now();
        let a = algo.run(&s.with_mode(algo.mode()), &opts)?;
        let secs = start.elapsed().as_secs_f64();
        let r = kkt_audit(&s, &a)?.max_residual();
        ok &= a.converged() && r <= opts.kkt_tol && secs <= 60.0;
        parts.push(format!("{} {r:.1e} in {secs:.1}s", algo.as_str()));
    }
    Ok((ok, format!("{} tones: {}", s.n_tones(), parts.join(", "))))
}

fn sweep(direction: Direction, algorithms: Vec<Algo>) -> Result<Vec<SweepRow>> {
    let cfg = ExperimentConfig { algorithms, ..ExperimentConfig::default_for(direction) };
    run_sweep(&cfg)
}

fn rates(rows: &[SweepRow], algo: Algo) -> Vec<f64> {
    rows.iter().filter(|r| r.algo == algo).map(|r| r.sum_rate).collect()
}

fn dominance_and_trend() -> Result<((bool, String), (bool, String))> {
    let mut dom_ok = true;
    let mut dom = Vec::new();
    let mut trend_ok = true;
    let mut trend = Vec::new();
    for (direction, base) in [(Direction::Downstream, Algo::Dp), (Direction::Upstream, Algo::Zf)] {
        let rows = sweep(direction, vec![Algo::Algo2, Algo::Algo3, Algo::Truncation, base])?;
        if rows.iter().any(|r| r.status == "error") {
            return Err(Error::InvalidInput(format!("{} sweep point failed", direction.as_str())));
        }
        let (r2, r3, rt, rb) = (rates(&rows, Algo::Algo2), rates(&rows, Algo::Algo3), rates(&rows, Algo::Truncation), rates(&rows, base));
        let mut margin = f64::INFINITY;
        for k in 0..r2.len() {
            let tol = 1e-9 * r2[k];
            margin = margin.min(r2[k].min(r3[k]) - rb[k]).min(r3[k] - rt[k] + tol);
            dom_ok &= r2[k] + tol >= rb[k] && r3[k] + tol >= rb[k] && r3[k] + tol >= rt[k];
        }
        dom.push(format!("{} vs {} min margin {:.4} Mbps", direction.as_str(), base.as_str(), margin / 1e6));
        let avg: Vec<f64> = rows.iter().filter(|r| r.algo == Algo::Algo2).map(|r| r.avg_rate).collect();
        let monotone = avg.windows(2).all(|w| w[1] >= w[0]);
        trend_ok &= monotone;
        trend.push(format!(
            "{} avg {:.2} -> {:.2} Mbps{}",
            direction.as_str(),
            avg[0] / 1e6,
            avg[avg.len() - 1] / 1e6,
            if monotone { "" } else { " (not monotone)" }
        ));
    }
    Ok(((dom_ok, dom.join("; ")), (trend_ok, trend.join("; "))))
}

fn determinism() -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        algorithms: vec![Algo::Algo1, Algo::Dp],
        counts: vec![1, 3],
        subsets: 2,
        ..ExperimentConfig::default_for(Direction::Downstream)
    };
    let run = |threads: usize| -> Result<String> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| run_sweep(&cfg)).map(|rows| sweep_csv(&rows))
    };
    let (a, b, c) = (run(1)?, run(1)?, run(3)?);
    Ok((a == b && a == c, format!("{} bytes, 1 and 3 worker threads", a.len())))
}

/// Runs the quick checks, plus the default-scenario checks when `full`.
pub fn selftest(full: bool) -> Vec<CheckOutcome> {
    const NAMES: [&str; 10] = [
        "determinant identity",
        "analytic waterfilling",
        "small-instance oracle",
        "KKT audit on default scenario",
        "dominance over baselines",
        "sweep trend",
        "reductions",
        "default constants",
        "parallel-SISO Monte Carlo",
        "sweep determinism",
    ];
    let mut out = vec![
        CheckOutcome::new(1, NAMES[0], determinant_identity()),
        CheckOutcome::new(2, NAMES[1], waterfilling()),
        CheckOutcome::skipped(3, NAMES[2], "projected-gradient oracle lives in the acceptance test target"),
    ];
    let reductions = CheckOutcome::new(5, NAMES[6], reductions());
    let consts = CheckOutcome::new(8, NAMES[7], constants());
    let mc = CheckOutcome::new(9, NAMES[8], monte_carlo());
    if full {
        out.push(CheckOutcome::new(4, NAMES[3], kkt_default()));
        out.push(reductions);
        match dominance_and_trend() {
            Ok((dom, trend)) => {
                out.push(CheckOutcome::new(6, NAMES[4], Ok(dom)));
                out.push(CheckOutcome::new(7, NAMES[5], Ok(trend)));
            }
            Err(e) => {
                out.push(CheckOutcome::new(6, NAMES[4], Err(Error::InvalidInput(e.to_string()))));
                out.push(CheckOutcome::new(7, NAMES[5], Err(e)));
            }
        }
        out.push(consts);
        out.push(mc);
        out.push(CheckOutcome::new(10, NAMES[9], determinism()));
    } else {
        out.push(CheckOutcome::skipped(4, NAMES[3], "needs --full"));
        out.push(reductions);
        out.push(CheckOutcome::skipped(6, NAMES[4], "needs --full"));
        out.push(CheckOutcome::skipped(7, NAMES[5], "needs --full"));
        out.push(consts);
        out.push(mc);
        out.push(CheckOutcome::skipped(10, NAMES[9], "needs --full"));
    }
    out
}
