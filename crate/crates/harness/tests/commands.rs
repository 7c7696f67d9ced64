use std::path::Path;

use spinchain_harness::commands::{filter, optimize, report, scan, simulate};
use spinchain_harness::io::{read_pulse, read_quantities, read_table};
use spinchain_harness::manifest::ResultBundle;
use spinchain_harness::{HarnessError, RunConfig};

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml(text).unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
        if rel != "manifest.json" {
            out.push(rel);
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn simulate_writes_listed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[chain]\nn_sites = 21\ntotal_time = 30.0\n[baseline]\nstrength = 0.5\n");
    let out = simulate(&cfg, dir.path()).unwrap();
    let listed: Vec<String> = out.bundle.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, files_in(dir.path()));
    assert!(out.bundle.stale_files(dir.path()).is_empty());
    assert_eq!(ResultBundle::read(dir.path()).unwrap(), out.bundle);
    let snaps = read_table(&dir.path().join("snapshots.csv"), &["t", "p_1"]).unwrap();
    assert_eq!(snaps.len(), 5);
    let traj = read_table(&dir.path().join("trajectory.csv"), &["t", "x_expect", "E", "dE", "p_1"]).unwrap();
    assert_eq!(traj[0].len(), 4 + 21);
    let echoed = RunConfig::from_toml(&std::fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn zero_time_gives_single_initial_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[chain]\nn_sites = 4\ntotal_time = 0.0\n");
    let out = simulate(&cfg, dir.path()).unwrap();
    assert_eq!(out.summary.final_infidelity, 1.0);
    let snaps = read_table(&dir.path().join("snapshots.csv"), &["t", "p_1"]).unwrap();
    assert_eq!(snaps.len(), 1);
    let p: Vec<f64> = snaps[0][1..].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = config("[chain]\nn_sites = 7\ntotal_time = 6.0\n[krotov]\nmax_iterations = 20\n");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    optimize(&cfg, a.path(), None).unwrap();
    optimize(&cfg, b.path(), None).unwrap();
    for f in files_in(a.path()) {
        assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::read(a.path().join("manifest.json")).unwrap(), std::fs::read(b.path().join("manifest.json")).unwrap());
}

#[test]
fn resuming_from_an_optimal_pulse_is_a_no_op() {
    let cfg = config("[chain]\nn_sites = 7\ntotal_time = 9.0\n[krotov]\nmax_iterations = 3000\n");
    let a = tempfile::tempdir().unwrap();
    let first = optimize(&cfg, a.path(), None).unwrap();
    assert!(first.result.converged);
    let b = tempfile::tempdir().unwrap();
    let again = optimize(&cfg, b.path(), Some(&a.path().join("pulse.csv"))).unwrap();
    assert_eq!(again.result.iterations_run, 1);
    assert_eq!(read_pulse(&b.path().join("pulse.csv")).unwrap(), read_pulse(&a.path().join("pulse.csv")).unwrap());
}

#[test]
fn filter_above_nyquist_changes_nothing() {
    let cfg = config("[chain]\nn_sites = 9\ntotal_time = 8.0\n[krotov]\nmax_iterations = 50\n");
    let a = tempfile::tempdir().unwrap();
    optimize(&cfg, a.path(), None).unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = filter(&cfg, b.path(), &a.path().join("pulse.csv"), 1000.0).unwrap();
    assert!((out.infidelity_after - out.infidelity_before).abs() < 1e-10);
    let dc = tempfile::tempdir().unwrap();
    let flat = filter(&cfg, dc.path(), &a.path().join("pulse.csv"), 0.0).unwrap();
    let c = flat.pulse.strength();
    assert!(c.iter().all(|v| (v - c[0]).abs() < 1e-12));
    let rows = read_quantities(&b.path().join("filter_report.csv")).unwrap();
    assert!(rows.iter().any(|(q, _)| q == "infidelity_after"));
}

#[test]
fn filter_rejects_mismatched_grid() {
    let cfg = config("[chain]\nn_sites = 9\ntotal_time = 8.0\n");
    let a = tempfile::tempdir().unwrap();
    simulate(&cfg, a.path()).unwrap();
    let other = config("[chain]\nn_sites = 9\ntotal_time = 5.0\n");
    let err = filter(&other, a.path().join("f").as_path(), &a.path().join("pulse.csv"), 4.0).unwrap_err();
    assert!(matches!(err, HarnessError::Core(spinchain::Error::InvalidArgument(_))), "{err}");
}

#[test]
fn scan_resumes_and_reports() {
    let text = "[chain]\nn_sites = 5\n[scan]\nn_list = [5, 7]\niterations = 400\nper_edge_max = 2.0\nper_edge_step = 0.5\nper_edge_min = 0.5\nbisection_steps = 2\n";
    let cfg = config(text);
    let dir = tempfile::tempdir().unwrap();
    let first = scan(&cfg, dir.path(), 2).unwrap();
    assert!(!first.cells.is_empty());
    let table = std::fs::read(dir.path().join("scan.csv")).unwrap();
    let again = scan(&cfg, dir.path(), 1).unwrap();
    assert_eq!(again.cells, first.cells);
    assert_eq!(std::fs::read(dir.path().join("scan.csv")).unwrap(), table);
    let fit = read_quantities(&dir.path().join("fit.csv")).unwrap();
    for q in ["grid_per_edge_max", "threshold", "tqsl_star_N5"] {
        assert!(fit.iter().any(|(k, _)| k == q), "{q}");
    }
    let rep = tempfile::tempdir().unwrap();
    let out = report(dir.path(), rep.path(), 1.0).unwrap();
    assert!(out.rows.iter().any(|r| r.source == "swap_reference" && r.n_sites == 7));
    let swap = out.rows.iter().find(|r| r.source == "swap_reference" && r.n_sites == 5).unwrap();
    assert!((swap.total_time - 4.0 * std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(report(dir.path(), dir.path(), 1.0), Err(HarnessError::MissingInputs(_))));
}
