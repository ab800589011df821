//! Experiment configuration, coordinated-count sweeps, plot-data output and
//! the built-in self checks behind `dsmopt selftest`.

mod selftest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binder::{
    gen_binder, load_scenario, BandPlan, BinderModelParams, ConstraintMode, Direction, DisturberKind, LinkConfig,
    Scenario, DEFAULT_DELTA_F_HZ, DEFAULT_F_MAX_HZ, DEFAULT_N_LINES,
};
use crate::error::{Error, Result};
use crate::spectra::{
    algo1_total_power, algo2_per_modem, algo3_per_modem_mask, kkt_audit, truncation_baseline, Allocation,
    SolverOptions,
};
use crate::structures::{dp_baseline, zf_baseline};

pub use selftest::{selftest, CheckOutcome};

/// Every allocation producer the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Algo1,
    Algo2,
    Algo3,
    Truncation,
    Dp,
    Zf,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Algo1 => "algo1",
            Algo::Algo2 => "algo2",
            Algo::Algo3 => "algo3",
            Algo::Truncation => "truncation",
            Algo::Dp => "dp",
            Algo::Zf => "zf",
        }
    }

    /// Constraint set the producer targets.
    pub fn mode(self) -> ConstraintMode {
        match self {
            Algo::Algo1 => ConstraintMode::Total,
            Algo::Algo2 => ConstraintMode::PerModem,
            _ => ConstraintMode::PerModemMask,
        }
    }

    /// Whether the output is a KKT point of its constraint set.
    pub fn is_optimal(self) -> bool {
        matches!(self, Algo::Algo1 | Algo::Algo2 | Algo::Algo3)
    }

    pub fn run(self, s: &Scenario, opts: &SolverOptions) -> Result<Allocation> {
        match self {
            Algo::Algo1 => algo1_total_power(s, opts),
            Algo::Algo2 => algo2_per_modem(s, opts),
            Algo::Algo3 => algo3_per_modem_mask(s, opts),
            Algo::Truncation => truncation_baseline(s, opts),
            Algo::Dp => dp_baseline(s, opts),
            Algo::Zf => zf_baseline(s, opts),
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "algo1" | "total" => Algo::Algo1,
            "algo2" | "per-modem" => Algo::Algo2,
            "algo3" | "per-modem-mask" => Algo::Algo3,
            "truncation" => Algo::Truncation,
            "dp" => Algo::Dp,
            "zf" => Algo::Zf,
            other => return Err(Error::InvalidInput(format!("unknown algorithm '{other}'"))),
        })
    }
}

/// Where a sweep gets its full binder from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSource {
    /// A scenario JSON file.
    File(PathBuf),
    /// The synthetic binder model with the default band plan of `direction`.
    Model { params: BinderModelParams, n_lines: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    pub direction: Direction,
    /// Picks the algorithm when `algorithms` is empty.
    pub constraint_mode: ConstraintMode,
    pub algorithms: Vec<Algo>,
    /// Coordinated-line counts; empty means `1..=N`.
    pub counts: Vec<usize>,
    /// Number of seeded random coordinated subsets per count; 0 uses the
    /// first `k` lines.
    pub subsets: usize,
    pub options: SolverOptions,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The default 8-line binder in `direction` with VDSL2 disturbers.
    pub fn default_for(direction: Direction) -> Self {
        ExperimentConfig {
            scenario: ScenarioSource::Model {
                params: BinderModelParams::for_direction(direction, DisturberKind::Vdsl2),
                n_lines: DEFAULT_N_LINES,
            },
            direction,
            constraint_mode: ConstraintMode::PerModem,
            algorithms: Vec::new(),
            counts: Vec::new(),
            subsets: 0,
            options: SolverOptions::default(),
            seed: 42,
            out_dir: None,
        }
    }

    pub fn algorithms(&self) -> Vec<Algo> {
        if !self.algorithms.is_empty() {
            return self.algorithms.clone();
        }
        vec![match self.constraint_mode {
            ConstraintMode::Total => Algo::Algo1,
            ConstraintMode::PerModem => Algo::Algo2,
            ConstraintMode::PerModemMask => Algo::Algo3,
        }]
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            ScenarioSource::File(path) => load_scenario(path),
            ScenarioSource::Model { params, n_lines } => model_scenario(params, *n_lines, self.direction),
        }
    }
}

/// Synthetic binder on the default grid and band plan of `direction`, with
/// default link settings.
pub fn model_scenario(params: &BinderModelParams, n_lines: usize, direction: Direction) -> Result<Scenario> {
    gen_binder(
        params,
        n_lines,
        &BandPlan::vdsl2(direction),
        DEFAULT_DELTA_F_HZ,
        DEFAULT_F_MAX_HZ,
        &LinkConfig::for_direction(direction),
    )
}

/// The default seeded 8-line scenario used by the acceptance checks.
pub fn default_scenario(direction: Direction) -> Result<Scenario> {
    model_scenario(&BinderModelParams::for_direction(direction, DisturberKind::Vdsl2), DEFAULT_N_LINES, direction)
}

pub const SWEEP_CSV_HEADER: &str = "k,avg_rate_mbps,min_rate_mbps,max_rate_mbps,sum_rate_mbps,algo,status";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub algo: Algo,
    /// Rates in bits/s, averaged over subsets when several are drawn.
    pub avg_rate: f64,
    pub min_rate: f64,
    pub max_rate: f64,
    pub sum_rate: f64,
    /// `ok`, `not-converged` or `error`.
    pub status: &'static str,
    pub message: Option<String>,
    /// Largest KKT residual over the point's allocations (optimal producers only).
    pub kkt_max: Option<f64>,
}

/// Coordinated sets for count `k`: the first `k` lines, or `subsets` seeded
/// random draws.
pub fn coordinated_sets(n_lines: usize, k: usize, subsets: usize, seed: u64) -> Vec<Vec<usize>> {
    if subsets == 0 {
        return vec![(0..k).collect()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..subsets)
        .map(|_| {
            let mut set = sample(&mut rng, n_lines, k).into_vec();
            set.sort_unstable();
            set
        })
        .collect()
}

fn run_point(full: &Scenario, set: &[usize], algo: Algo, opts: &SolverOptions) -> Result<(Allocation, Option<f64>)> {
    let s = full.coordinate_subset(set)?.with_mode(algo.mode());
    let a = algo.run(&s, opts)?;
    let kkt = if algo.is_optimal() { Some(kkt_audit(&s, &a)?.max_residual()) } else { None };
    Ok((a, kkt))
}

/// Runs every algorithm at every coordinated count. Points are independent;
/// failures are recorded in the row instead of aborting the sweep. With an
/// output directory, each point's summary CSV and the sweep CSV are written.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.options.validate()?;
    let full = cfg.load_scenario()?;
    let n = full.n_lines();
    let counts: Vec<usize> = if cfg.counts.is_empty() { (1..=n).collect() } else { cfg.counts.clone() };
    if let Some(&bad) = counts.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::InvalidInput(format!("coordinated count {bad} outside 1..={n}")));
    }
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows = Vec::new();
    for algo in cfg.algorithms() {
        for &k in &counts {
            let sets = coordinated_sets(n, k, cfg.subsets, cfg.seed);
            let mut acc = [0.0; 4];
            let mut status = "ok";
            let mut message = None;
            let mut kkt_max: Option<f64> = None;
            for (j, set) in sets.iter().enumerate() {
                match run_point(&full, set, algo, &cfg.options) {
                    Ok((a, kkt)) => {
                        let rates = &a.rates_per_line;
                        acc[0] += a.sum_rate / rates.len() as f64;
                        acc[1] += rates.iter().copied().fold(f64::INFINITY, f64::min);
                        acc[2] += rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        acc[3] += a.sum_rate;
                        if !a.converged() {
                            status = "not-converged";
                        }
                        if let Some(r) = kkt {
                            kkt_max = Some(kkt_max.map_or(r, |m| m.max(r)));
                        }
                        if let Some(dir) = &cfg.out_dir {
                            let name = format!("point_{}_k{}_s{}.csv", algo.as_str(), k, j);
                            crate::spectra::write_summary_csv(&a, dir.join(name))?;
                        }
                    }
                    Err(e) => {
                        status = "error";
                        message = Some(e.to_string());
                        acc = [f64::NAN; 4];
                        break;
                    }
                }
            }
            let m = sets.len() as f64;
            rows.push(SweepRow {
                k,
                algo,
                avg_rate: acc[0] / m,
                min_rate: acc[1] / m,
                max_rate: acc[2] / m,
                sum_rate: acc[3] / m,
                status,
                message,
                kkt_max,
            });
        }
    }
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join("sweep.csv");
        fs::write(&path, sweep_csv(&rows)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(rows)
}

fn mbps(x: f64) -> String {
    if x.is_finite() {
        format!("{:.4}", x / 1e6)
    } else {
        "nan".into()
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            mbps(r.avg_rate),
            mbps(r.min_rate),
            mbps(r.max_rate),
            mbps(r.sum_rate),
            r.algo.as_str(),
            r.status
        )
        .unwrap();
    }
    out
}

pub const PLOT_RATES_HEADER: &str = "line,rate_mbps";
pub const PLOT_PSD_HEADER: &str = "tone,freq_hz,line,psd_dbm_hz";

/// Writes `plot_rates.csv` (one bar per line) and `plot_psd.csv` (transmit
/// PSD against frequency, active tones only) into `dir`. Without active
/// tones both files hold only their headers.
pub fn emit_plotdata(s: &Scenario, a: &Allocation, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if a.n_lines() != s.n_lines() || a.n_tones() != s.n_tones() {
        return Err(Error::DimensionMismatch("allocation does not match scenario".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let active = s.tones().iter().any(|tc| !tc.is_dead());
    let mut rates = String::from(PLOT_RATES_HEADER);
    rates.push('\n');
    if active {
        for (n, r) in a.rates_per_line.iter().enumerate() {
            writeln!(rates, "{n},{:.4}", r / 1e6).unwrap();
        }
    }
    let mut psd = String::from(PLOT_PSD_HEADER);
    psd.push('\n');
    for (i, tc) in s.tones().iter().enumerate().filter(|(_, tc)| !tc.is_dead()) {
        for n in 0..a.n_lines() {
            let dbm_hz = 10.0 * (a.psd[n][i] / s.delta_f()).log10() + 30.0;
            writeln!(psd, "{},{},{},{:.4}", tc.index, tc.freq, n, dbm_hz).unwrap();
        }
    }
    for (name, text) in [("plot_rates.csv", rates), ("plot_psd.csv", psd)] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binder::{
        dbm_hz_to_w_per_tone, DEFAULT_AWGN_DBM_HZ, DEFAULT_COUPLING_LENGTH_M, DEFAULT_F_SYM_HZ, DEFAULT_LOOP_LENGTH_M,
        DEFAULT_P_LINE_DBM, VDSL2_DOWNSTREAM_BANDS, VDSL2_UPSTREAM_BANDS,
    };

    #[test]
    fn default_constants() {
        assert_eq!(DEFAULT_DELTA_F_HZ, 4312.5);
        assert_eq!(DEFAULT_F_SYM_HZ, 4000.0);
        assert_eq!(DEFAULT_F_MAX_HZ, 12e6);
        assert_eq!(DEFAULT_AWGN_DBM_HZ, -140.0);
        assert_eq!(DEFAULT_P_LINE_DBM, 14.5);
        assert_eq!(DEFAULT_N_LINES, 8);
        assert_eq!(DEFAULT_LOOP_LENGTH_M, 800.0);
        assert_eq!(DEFAULT_COUPLING_LENGTH_M, 400.0);
        assert_eq!(VDSL2_DOWNSTREAM_BANDS, [[138e3, 3.75e6], [5.2e6, 8.5e6]]);
        assert_eq!(VDSL2_UPSTREAM_BANDS, [[25e3, 138e3], [3.75e6, 5.2e6], [8.5e6, 12e6]]);
        let cfg = ExperimentConfig::default_for(Direction::Downstream);
        let ScenarioSource::Model { params, n_lines } = &cfg.scenario else { panic!("model source expected") };
        assert_eq!(*n_lines, 8);
        assert_eq!(params.awgn_dbm_hz, -140.0);
        assert_eq!(params.loop_length_m, 800.0);
        assert_eq!(params.coupling_length_m, 400.0);
        assert!(dbm_hz_to_w_per_tone(-140.0, 4312.5) > 0.0);
    }

    #[test]
    fn algo_names_round_trip() {
        for a in [Algo::Algo1, Algo::Algo2, Algo::Algo3, Algo::Truncation, Algo::Dp, Algo::Zf] {
            assert_eq!(a.as_str().parse::<Algo>().unwrap(), a);
        }
        assert_eq!("per-modem".parse::<Algo>().unwrap(), Algo::Algo2);
        assert!("simplex".parse::<Algo>().is_err());
    }

    #[test]
    fn subsets_are_seeded_and_sorted() {
        assert_eq!(coordinated_sets(8, 3, 0, 1), vec![vec![0, 1, 2]]);
        let a = coordinated_sets(8, 3, 4, 9);
        assert_eq!(a, coordinated_sets(8, 3, 4, 9));
        assert_eq!(a.len(), 4);
        for set in &a {
            assert_eq!(set.len(), 3);
            assert!(set.windows(2).all(|w| w[0] < w[1]) && set.iter().all(|&x| x < 8));
        }
        assert_eq!(coordinated_sets(8, 8, 2, 9), vec![(0..8).collect::<Vec<_>>(); 2]);
    }

    #[test]
    fn sweep_csv_layout() {
        let row = SweepRow {
            k: 2,
            algo: Algo::Dp,
            avg_rate: 12_345_678.9,
            min_rate: 1e6,
            max_rate: 2e6,
            sum_rate: 3e6,
            status: "ok",
            message: None,
            kkt_max: None,
        };
        assert_eq!(sweep_csv(&[row]), format!("{SWEEP_CSV_HEADER}\n2,12.3457,1.0000,2.0000,3.0000,dp,ok\n"));
    }
}
