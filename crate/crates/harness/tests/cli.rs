use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinchain"))
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[chain]\nn_sites = 5\nbogus = 1\n").unwrap();
    let status = bin().args(["simulate", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin().args(["simulate", "--bogus-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[chain]\nn_sites = 6\ntotal_time = 5.0\n").unwrap();
    let run = dir.path().join("run");
    let out = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&run).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("manifest.json").is_file());
    let out = bin().arg("report").arg(&run).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("report.csv").is_file());
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(bin().arg("report").arg(&empty).status().unwrap().code(), Some(1));
}
