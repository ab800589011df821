use std::fs;

use dsmopt_core::binder::{save_scenario, BinderModelParams, DisturberKind};
use dsmopt_core::harness::{
    emit_plotdata, model_scenario, run_sweep, Algo, ExperimentConfig, ScenarioSource, PLOT_PSD_HEADER,
    PLOT_RATES_HEADER, SWEEP_CSV_HEADER,
};
use dsmopt_core::spectra::{algo1_total_power, algo2_per_modem};
use dsmopt_core::{CMatrix, Direction, Error, Scenario, SolverOptions};

fn small_model(direction: Direction, n_lines: usize) -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioSource::Model {
            params: BinderModelParams::for_direction(direction, DisturberKind::Vdsl2),
            n_lines,
        },
        ..ExperimentConfig::default_for(direction)
    }
}

#[test]
fn full_coordination_keeps_only_external_noise() {
    let s = model_scenario(&BinderModelParams::default(), 4, Direction::Downstream).unwrap();
    let all = s.coordinate_subset(&[0, 1, 2, 3]).unwrap();
    for (a, b) in s.tones().iter().zip(all.tones()) {
        assert_eq!(a.r, b.r);
        assert_eq!(a.h, b.h);
    }
    // folding the other lines in only ever adds noise
    let part = s.coordinate_subset(&[0, 2]).unwrap();
    for (a, b) in s.tones().iter().zip(part.tones()) {
        assert!(b.r.as_matrix()[(0, 0)].re >= a.r.as_matrix()[(0, 0)].re);
    }
}

#[test]
fn single_coordinated_line_is_scalar_waterfilling() {
    let s = model_scenario(&BinderModelParams::default(), 3, Direction::Upstream).unwrap();
    let one = s.coordinate_subset(&[1]).unwrap();
    assert_eq!(one.n_lines(), 1);
    let o = SolverOptions::default();
    let a1 = algo1_total_power(&one, &o).unwrap();
    let a2 = algo2_per_modem(&one, &o).unwrap();
    assert!((a1.sum_rate - a2.sum_rate).abs() <= 1e-8 * a1.sum_rate);
}

#[test]
fn sweep_rows_pass_the_audit_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        algorithms: vec![Algo::Algo1, Algo::Algo2, Algo::Algo3, Algo::Dp],
        counts: vec![1, 2, 3],
        out_dir: Some(dir.path().join("a")),
        ..small_model(Direction::Upstream, 3)
    };
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 12);
    let tol = cfg.options.kkt_tol;
    for r in &rows {
        assert_eq!(r.status, "ok", "{r:?}");
        assert!(r.min_rate <= r.avg_rate && r.avg_rate <= r.max_rate);
        assert!((r.avg_rate * r.k as f64 - r.sum_rate).abs() <= 1e-9 * r.sum_rate);
        match r.kkt_max {
            Some(k) => assert!(k <= tol, "{r:?}"),
            None => assert_eq!(r.algo, Algo::Dp),
        }
    }
    let again = ExperimentConfig { out_dir: Some(dir.path().join("b")), ..cfg };
    run_sweep(&again).unwrap();
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
    let sweep = fs::read_to_string(dir.path().join("a/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some(SWEEP_CSV_HEADER));
    assert_eq!(sweep.lines().count(), 13);
}

#[test]
fn seeded_subsets_are_averaged() {
    let cfg = ExperimentConfig { counts: vec![2], subsets: 3, seed: 5, ..small_model(Direction::Downstream, 4) };
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].status, "ok");
    assert_eq!(run_sweep(&cfg).unwrap(), rows);
}

#[test]
fn bad_counts_and_missing_files_are_rejected() {
    let cfg = ExperimentConfig { counts: vec![0, 2], ..small_model(Direction::Downstream, 2) };
    assert!(matches!(run_sweep(&cfg), Err(Error::InvalidInput(_))));
    let cfg = ExperimentConfig { counts: vec![3], ..small_model(Direction::Downstream, 2) };
    assert!(matches!(run_sweep(&cfg), Err(Error::InvalidInput(_))));
    let cfg = ExperimentConfig {
        scenario: ScenarioSource::File("/nonexistent/scenario.json".into()),
        ..ExperimentConfig::default_for(Direction::Downstream)
    };
    assert!(matches!(run_sweep(&cfg), Err(Error::Io { .. })));
}

#[test]
fn point_failures_are_recorded_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let ch = (0..3).map(|k| (CMatrix::identity(2).scale((1.0 / (1.0 + k as f64)).into()), CMatrix::identity(2)));
    let s = Scenario::from_matrices(ch.collect(), vec![1.0, 0.0], 0.0).unwrap();
    let path = dir.path().join("s.json");
    save_scenario(&s, &path).unwrap();
    let cfg = ExperimentConfig {
        scenario: ScenarioSource::File(path),
        algorithms: vec![Algo::Algo2],
        ..ExperimentConfig::default_for(Direction::Downstream)
    };
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows[0].status, "ok");
    assert_eq!(rows[1].status, "error");
    assert!(rows[1].message.is_some());
}

#[test]
fn plot_files_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let s = model_scenario(&BinderModelParams::default(), 3, Direction::Upstream).unwrap();
    let a = algo2_per_modem(&s, &SolverOptions::default()).unwrap();
    emit_plotdata(&s, &a, dir.path().join("one")).unwrap();
    emit_plotdata(&s, &a, dir.path().join("two")).unwrap();
    for name in ["plot_rates.csv", "plot_psd.csv"] {
        assert_eq!(fs::read(dir.path().join("one").join(name)).unwrap(), fs::read(dir.path().join("two").join(name)).unwrap());
    }
    let rates = fs::read_to_string(dir.path().join("one/plot_rates.csv")).unwrap();
    let mut lines = rates.lines();
    assert_eq!(lines.next(), Some(PLOT_RATES_HEADER));
    let parsed: Vec<(usize, f64)> = lines
        .map(|l| {
            let (n, r) = l.split_once(',').unwrap();
            (n.parse().unwrap(), r.parse().unwrap())
        })
        .collect();
    assert_eq!(parsed.len(), 3);
    for (n, r) in parsed {
        assert!((r - a.rates_per_line[n] / 1e6).abs() <= 5e-5);
    }
    let psd = fs::read_to_string(dir.path().join("one/plot_psd.csv")).unwrap();
    let mut lines = psd.lines();
    assert_eq!(lines.next(), Some(PLOT_PSD_HEADER));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3 * s.n_tones());
    assert!(rows.iter().all(|r| r.len() == 4 && r[3] <= -40.0));
}

#[test]
fn no_active_tones_gives_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    let ch = (0..4).map(|_| (CMatrix::zeros(2, 2), CMatrix::identity(2))).collect();
    let s = Scenario::from_matrices(ch, vec![1.0, 1.0], 0.0).unwrap();
    let a = algo2_per_modem(&s, &SolverOptions::default()).unwrap();
    assert_eq!(a.sum_rate, 0.0);
    emit_plotdata(&s, &a, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("plot_rates.csv")).unwrap(), format!("{PLOT_RATES_HEADER}\n"));
    assert_eq!(fs::read_to_string(dir.path().join("plot_psd.csv")).unwrap(), format!("{PLOT_PSD_HEADER}\n"));
}
