//! `dsmopt`: generate binder scenarios, solve for optimal spectra, sweep the
//! number of coordinated lines, audit stored allocations and run self checks.
//!
//! Exit codes: 0 success, 1 failed self check, 2 non-convergence,
//! 3 invalid input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsmopt_core::binder::{
    gen_binder, load_scenario, save_scenario, write_channel_csv, BandPlan, BinderModelParams, ConstraintMode,
    Direction, DisturberKind, LinkConfig, DEFAULT_DELTA_F_HZ, DEFAULT_F_MAX_HZ, DEFAULT_N_LINES,
};
use dsmopt_core::harness::{emit_plotdata, run_sweep, selftest, sweep_csv, Algo, ExperimentConfig, ScenarioSource};
use dsmopt_core::spectra::{kkt_audit, load_allocation, save_allocation, write_allocation_csv, write_summary_csv};
use dsmopt_core::{Error, SolverOptions};

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "dsmopt", version, about = "Power allocation for coordinated DSL lines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic binder scenario.
    Gen(GenArgs),
    /// Solve one scenario with one algorithm.
    Solve(SolveArgs),
    /// Sweep the number of coordinated lines.
    Sweep(SweepArgs),
    /// Audit a stored allocation against its scenario.
    Audit(AuditArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "downstream")]
    direction: Direction,
    /// Disturber type: vdsl2 or adsl2plus.
    #[arg(long, default_value = "vdsl2")]
    disturbers: DisturberKind,
    #[arg(long, default_value_t = DEFAULT_N_LINES)]
    lines: usize,
    /// Seed of the random coupling draws.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with the binder model parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl ModelArgs {
    fn params(&self) -> Result<BinderModelParams, Error> {
        let mut p = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?
            }
            None => BinderModelParams::for_direction(self.direction, self.disturbers),
        };
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        Ok(p)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "per-modem")]
    mode: ConstraintMode,
    /// Leave the lines without a spectral mask.
    #[arg(long)]
    no_mask: bool,
    /// Output scenario JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-tone channel CSV.
    #[arg(long)]
    channel_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// JSON file with solver options; flags below override it.
    #[arg(long)]
    options: Option<PathBuf>,
    #[arg(long)]
    eps_power: Option<f64>,
    #[arg(long)]
    eps_mask: Option<f64>,
    #[arg(long)]
    lambda_floor: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_bisect: Option<usize>,
    #[arg(long)]
    kkt_tol: Option<f64>,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions, Error> {
        let mut o = match &self.options {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?
            }
            None => SolverOptions::default(),
        };
        o.eps_power = self.eps_power.unwrap_or(o.eps_power);
        o.eps_mask = self.eps_mask.unwrap_or(o.eps_mask);
        o.lambda_floor = self.lambda_floor.unwrap_or(o.lambda_floor);
        o.max_outer = self.max_outer.unwrap_or(o.max_outer);
        o.max_bisect = self.max_bisect.unwrap_or(o.max_bisect);
        o.kkt_tol = self.kkt_tol.unwrap_or(o.kkt_tol);
        o.validate()?;
        Ok(o)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// algo1|algo2|algo3|truncation|dp|zf (aliases: total, per-modem, per-modem-mask).
    #[arg(long)]
    algo: Algo,
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write plot_rates.csv and plot_psd.csv.
    #[arg(long)]
    plot: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario JSON; without it the synthetic binder model is used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', default_value = "algo2")]
    algo: Vec<Algo>,
    /// Coordinated counts: `a..b` or a comma list; default 1..N.
    #[arg(long)]
    counts: Option<String>,
    /// Seeded random coordinated subsets per count (0: first k lines).
    #[arg(long, default_value_t = 0)]
    subsets: usize,
    /// Seed of the subset draws.
    #[arg(long, default_value_t = 42)]
    subset_seed: u64,
    /// Output directory for sweep.csv and per-point summaries.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Allocation JSON written by `solve`.
    #[arg(long)]
    allocation: PathBuf,
    /// Residual tolerance; defaults to the solver default.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Include the default-scenario checks (slow).
    #[arg(long)]
    full: bool,
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INVALID,
    }
}

fn parse_counts(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::InvalidInput(format!("bad count list '{text}'"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn mkdir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn gen(args: &GenArgs) -> Result<u8, Error> {
    let params = args.model.params()?;
    let mut link = LinkConfig::for_direction(args.model.direction);
    link.constraint_mode = args.mode;
    if args.no_mask {
        link.mask = None;
    }
    let plan = BandPlan::vdsl2(args.model.direction);
    let s = gen_binder(&params, args.model.lines, &plan, DEFAULT_DELTA_F_HZ, DEFAULT_F_MAX_HZ, &link)?;
    save_scenario(&s, &args.out)?;
    if let Some(path) = &args.channel_csv {
        write_channel_csv(&s, path)?;
    }
    eprintln!("wrote {} lines x {} tones to {}", s.n_lines(), s.n_tones(), args.out.display());
    Ok(0)
}

fn solve(args: &SolveArgs) -> Result<u8, Error> {
    let opts = args.solver.options()?;
    let s = load_scenario(&args.scenario)?;
    let a = args.algo.run(&s, &opts)?;
    mkdir(&args.out)?;
    write_allocation_csv(&s, &a, args.out.join("allocation.csv"))?;
    write_summary_csv(&a, args.out.join("summary.csv"))?;
    save_allocation(&a, s.f_sym(), args.out.join("allocation.json"))?;
    if args.plot {
        emit_plotdata(&s, &a, &args.out)?;
    }
    if args.algo.is_optimal() {
        let rep = kkt_audit(&s, &a)?;
        let path = args.out.join("kkt.json");
        let text = serde_json::to_string_pretty(&rep).expect("report serializes");
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
    }
    println!("{} sum_rate_mbps {:.4} converged {}", a.algo, a.sum_rate / 1e6, a.converged());
    if !a.converged() {
        eprintln!("error: {} did not converge; best iterate written to {}", a.algo, args.out.display());
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn sweep(args: &SweepArgs) -> Result<u8, Error> {
    let scenario = match &args.scenario {
        Some(path) => ScenarioSource::File(path.clone()),
        None => ScenarioSource::Model { params: args.model.params()?, n_lines: args.model.lines },
    };
    let cfg = ExperimentConfig {
        scenario,
        direction: args.model.direction,
        constraint_mode: ConstraintMode::PerModem,
        algorithms: args.algo.clone(),
        counts: args.counts.as_deref().map(parse_counts).transpose()?.unwrap_or_default(),
        subsets: args.subsets,
        options: args.solver.options()?,
        seed: args.subset_seed,
        out_dir: args.out.clone(),
    };
    let rows = run_sweep(&cfg)?;
    print!("{}", sweep_csv(&rows));
    let mut code = 0;
    for r in &rows {
        if r.status != "ok" {
            eprintln!(
                "warning: {} k={} {}{}",
                r.algo.as_str(),
                r.k,
                r.status,
                r.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
            );
            code = EXIT_NOT_CONVERGED;
        }
    }
    Ok(code)
}

fn audit(args: &AuditArgs) -> Result<u8, Error> {
    let s = load_scenario(&args.scenario)?;
    let a = load_allocation(&args.allocation)?;
    let tol = args.tol.unwrap_or(SolverOptions::default().kkt_tol);
    let rep = kkt_audit(&s, &a)?;
    println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
    if rep.passes(tol) && rep.converged {
        Ok(0)
    } else {
        eprintln!("error: allocation fails the KKT audit at tolerance {tol:e}");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn run_selftest(args: &SelftestArgs) -> Result<u8, Error> {
    let outcomes = selftest(args.full);
    for o in &outcomes {
        println!("{}", o.line());
    }
    Ok(if outcomes.iter().any(|o| o.passed == Some(false)) { EXIT_FAILED_CHECK } else { 0 })
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("DSMOPT_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("DSMOPT_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let result = init_threads().and_then(|()| match &cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::Solve(a) => solve(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Audit(a) => audit(a),
        Cmd::Selftest(a) => run_selftest(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_lists() {
        assert_eq!(parse_counts("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_counts("2, 5,8").unwrap(), vec![2, 5, 8]);
        assert!(parse_counts("4..1").is_err());
        assert!(parse_counts("x").is_err());
    }
}
