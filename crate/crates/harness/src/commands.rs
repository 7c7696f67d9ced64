//! The five subcommands. Each writes its files into one output directory,
//! echoes the config there and finishes with a manifest.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinchain::analysis::{
    amplitude_spectrum, average_velocity, find_tqsl_star, fit_line, lowpass_filter, nominal_velocity, tau_qsl,
    QslBranch, QslFit, ScanRecord, TqslStar,
};
use spinchain::krotov::{optimize as run_krotov, KrotovSettings, OptimizationResult};
use spinchain::model::{basis_state, ChainConfig, ControlPulse};
use spinchain::propagator::{evolve, infidelity, propagate, Direction, RecordingOptions, Trajectory};

use crate::config::{ramp_seed, RunConfig};
use crate::error::{HarnessError, Result};
use crate::io::{fmt, read_pulse, read_quantities, write_history, write_pulse, write_quantities, write_table, write_trajectory};
use crate::manifest::{sha256_hex, ResultBundle};

/// Collects emitted files for the manifest.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, content).map_err(|e| HarnessError::io(&path, e))
    }

    fn finish(mut self, command: &str, config: &str) -> Result<ResultBundle> {
        self.text("config.toml", config)?;
        let bundle = ResultBundle::new(command, config, &self.dir, &self.files)?;
        bundle.write(&self.dir)?;
        Ok(bundle)
    }
}

/// Diagnostics of one transfer, stored as `summary.json` and `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub n_sites: usize,
    pub total_time: f64,
    pub coupling: f64,
    pub final_infidelity: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub nominal_velocity: Option<f64>,
    pub average_velocity: Option<f64>,
    pub mean_energy_spread: Option<f64>,
    pub tau_qsl: Option<f64>,
    pub branch: Option<String>,
}

impl RunSummary {
    fn rows(&self) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_else(|| "NaN".into());
        let mut rows = vec![
            ("N".to_string(), self.n_sites.to_string()),
            ("T".to_string(), fmt(self.total_time)),
            ("J".to_string(), fmt(self.coupling)),
            ("final_infidelity".to_string(), fmt(self.final_infidelity)),
            ("final_fidelity".to_string(), fmt(1.0 - self.final_infidelity)),
            ("v_a".to_string(), opt(self.nominal_velocity)),
            ("v_d".to_string(), opt(self.average_velocity)),
            ("mean_dE".to_string(), opt(self.mean_energy_spread)),
            ("tau_qsl".to_string(), opt(self.tau_qsl)),
        ];
        if let Some(i) = self.iterations {
            rows.push(("iterations".to_string(), i.to_string()));
        }
        if let Some(c) = self.converged {
            rows.push(("converged".to_string(), u8::from(c).to_string()));
        }
        rows
    }
}

fn branch_name(b: QslBranch) -> &'static str {
    match b {
        QslBranch::Coupling => "coupling",
        QslBranch::Spread => "spread",
    }
}

fn recording(cfg: &ChainConfig<f64>, stride: usize, fractions: &[f64], probabilities: bool) -> RecordingOptions {
    let steps = cfg.n_steps();
    RecordingOptions {
        stride: Some(if stride > 0 { stride } else { steps.div_ceil(1000).max(1) }),
        extra_points: snapshot_indices(steps, fractions),
        states: false,
        probabilities,
        observables: true,
    }
}

fn snapshot_indices(steps: usize, fractions: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = fractions.iter().map(|f| (f * steps as f64).round() as usize).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Velocity and speed-limit diagnostics of a forward run.
fn diagnose(command: &str, cfg: &ChainConfig<f64>, traj: &Trajectory<f64>, final_infidelity: f64) -> RunSummary {
    let t = cfg.total_time();
    let n = cfg.n_sites();
    let qsl = if t > 0.0 { tau_qsl(traj, cfg.coupling()).ok() } else { None };
    RunSummary {
        command: command.to_string(),
        n_sites: n,
        total_time: t,
        coupling: cfg.coupling(),
        final_infidelity,
        iterations: None,
        converged: None,
        nominal_velocity: nominal_velocity(n, t).ok(),
        average_velocity: if t > 0.0 { average_velocity(traj).ok() } else { None },
        mean_energy_spread: qsl.map(|q| q.mean_energy_spread),
        tau_qsl: qsl.map(|q| q.tau_per_site),
        branch: qsl.map(|q| branch_name(q.dominant_branch).to_string()),
    }
}

fn write_snapshots(path: &Path, cfg: &ChainConfig<f64>, traj: &Trajectory<f64>, fractions: &[f64]) -> Result<()> {
    let wanted = snapshot_indices(cfg.n_steps(), fractions);
    let probs = traj.site_probabilities.as_ref().expect("probabilities recorded");
    let mut header = vec!["t".to_string()];
    header.extend((1..=cfg.n_sites()).map(|i| format!("p_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = wanted.iter().filter_map(|&k| {
        let t = cfg.time(k);
        let row = traj.times.iter().position(|&x| (x - t).abs() <= 1e-9 * (1.0 + t))?;
        let mut out = vec![fmt(t)];
        out.extend(probs[row].iter().map(|&p| fmt(p)));
        Some(out)
    });
    write_table(path, &header, rows)
}

fn write_summary(out: &mut Output, summary: &RunSummary) -> Result<()> {
    write_quantities(&out.path("summary.csv"), &summary.rows())?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes") + "\n";
    out.text("summary.json", &json)
}

fn trace(
    command: &str,
    cfg: &ChainConfig<f64>,
    config: &RunConfig,
    pulse: &ControlPulse<f64>,
) -> Result<(Trajectory<f64>, RunSummary)> {
    let initial = basis_state(cfg, 1)?;
    let target = basis_state(cfg, cfg.n_sites())?;
    let opts = recording(cfg, config.outputs.snapshot_stride, &config.outputs.snapshot_fractions, true);
    let traj = propagate(cfg, pulse, &initial, Direction::Forward, &opts)?;
    let inf = infidelity(&traj.final_state, &target)?;
    let summary = diagnose(command, cfg, &traj, inf);
    Ok((traj, summary))
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub summary: RunSummary,
    pub bundle: ResultBundle,
}

/// Propagates the baseline pulse and writes its trajectory.
pub fn simulate(config: &RunConfig, out_dir: &Path) -> Result<SimulateOutcome> {
    let cfg = config.chain_config()?;
    let pulse = config.baseline_pulse(&cfg)?;
    let mut out = Output::create(out_dir)?;
    let (traj, summary) = trace("simulate", &cfg, config, &pulse)?;
    write_pulse(&out.path("pulse.csv"), &pulse)?;
    write_trajectory(&out.path("trajectory.csv"), &traj)?;
    write_snapshots(&out.path("snapshots.csv"), &cfg, &traj, &config.outputs.snapshot_fractions)?;
    write_summary(&mut out, &summary)?;
    let bundle = out.finish("simulate", &config.to_toml())?;
    Ok(SimulateOutcome { summary, bundle })
}

#[derive(Debug)]
pub struct OptimizeOutcome {
    pub result: OptimizationResult<f64>,
    pub summary: RunSummary,
    pub bundle: ResultBundle,
}

/// Runs Krotov from the baseline (or from `resume`) and writes the optimized
/// pulse, its history and its trajectory.
pub fn optimize(config: &RunConfig, out_dir: &Path, resume: Option<&Path>) -> Result<OptimizeOutcome> {
    let cfg = config.chain_config()?;
    let seed = match resume {
        Some(p) => {
            let pulse = read_pulse(p)?;
            pulse.check_grid(&cfg)?;
            pulse
        }
        None => config.baseline_pulse(&cfg)?,
    };
    let initial = basis_state(&cfg, 1)?;
    let target = basis_state(&cfg, cfg.n_sites())?;
    let result = run_krotov(&cfg, &seed, &initial, &target, &config.krotov_settings())?;
    log::info!(
        "N={} T={}: infidelity {:e} after {} iterations",
        cfg.n_sites(),
        cfg.total_time(),
        result.infidelity_history.last().copied().unwrap_or(f64::NAN),
        result.iterations_run
    );
    let mut out = Output::create(out_dir)?;
    let (traj, mut summary) = trace("optimize", &cfg, config, &result.final_pulse)?;
    summary.iterations = Some(result.iterations_run);
    summary.converged = Some(result.converged);
    write_pulse(&out.path("pulse.csv"), &result.final_pulse)?;
    write_pulse(&out.path("seed_pulse.csv"), &seed)?;
    write_history(&out.path("history.csv"), &result.infidelity_history)?;
    write_trajectory(&out.path("trajectory.csv"), &traj)?;
    write_snapshots(&out.path("snapshots.csv"), &cfg, &traj, &config.outputs.snapshot_fractions)?;
    write_summary(&mut out, &summary)?;
    let bundle = out.finish("optimize", &config.to_toml())?;
    Ok(OptimizeOutcome { result, summary, bundle })
}

/// Stored result of one scan cell, reused when a scan is re-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub fingerprint: String,
    pub n_sites: usize,
    pub total_time: f64,
    pub final_infidelity: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub diverged: bool,
    pub average_velocity: Option<f64>,
    pub mean_energy_spread: Option<f64>,
    pub tau_qsl: Option<f64>,
    pub branch: Option<String>,
}

impl CellResult {
    pub fn record(&self) -> ScanRecord<f64> {
        ScanRecord {
            n_sites: self.n_sites,
            total_time: self.total_time,
            final_infidelity: self.final_infidelity,
            iterations_run: self.iterations_run,
        }
    }
}

fn cell_stem(n: usize, steps: usize) -> String {
    format!("n{n:03}_steps{steps:08}")
}

/// Everything that influences a cell's outcome apart from `(N, T)`.
fn scan_fingerprint(config: &RunConfig, settings: &KrotovSettings<f64>) -> String {
    let key = format!(
        "J={:e} dt={:e} w={:e} g={:e} R={} eps={:e} backoff={} k={:?}",
        config.chain.coupling,
        config.chain.dt,
        settings.step_weight,
        settings.strength_gain,
        settings.max_iterations,
        settings.infidelity_threshold,
        settings.adaptive_backoff,
        config.baseline.strength,
    );
    sha256_hex(key.as_bytes())
}

struct CellRunner<'a> {
    config: &'a RunConfig,
    settings: KrotovSettings<f64>,
    fingerprint: String,
    cells_dir: PathBuf,
}

impl CellRunner<'_> {
    fn run(&self, n: usize, total_time: f64) -> Result<CellResult> {
        let cfg = self.config.chain_with(n, total_time)?;
        let stem = cell_stem(n, cfg.n_steps());
        let json_path = self.cells_dir.join(format!("{stem}.json"));
        if let Ok(text) = std::fs::read_to_string(&json_path) {
            if let Ok(cell) = serde_json::from_str::<CellResult>(&text) {
                if cell.fingerprint == self.fingerprint {
                    log::info!("N={n} T={}: reusing stored cell", cfg.total_time());
                    return Ok(cell);
                }
            }
        }
        let seed = ramp_seed(&cfg, None, self.config.baseline.strength)?;
        let initial = basis_state(&cfg, 1)?;
        let target = basis_state(&cfg, n)?;
        let cell = match run_krotov(&cfg, &seed, &initial, &target, &self.settings) {
            Ok(result) => {
                let opts = RecordingOptions { probabilities: false, ..recording(&cfg, 0, &[], false) };
                let traj = propagate(&cfg, &result.final_pulse, &initial, Direction::Forward, &opts)?;
                let summary = diagnose("scan", &cfg, &traj, 1.0 - result.final_fidelity);
                write_pulse(&self.cells_dir.join(format!("{stem}_pulse.csv")), &result.final_pulse)?;
                CellResult {
                    fingerprint: self.fingerprint.clone(),
                    n_sites: n,
                    total_time: cfg.total_time(),
                    final_infidelity: 1.0 - result.final_fidelity,
                    iterations_run: result.iterations_run,
                    converged: result.converged,
                    diverged: false,
                    average_velocity: summary.average_velocity,
                    mean_energy_spread: summary.mean_energy_spread,
                    tau_qsl: summary.tau_qsl,
                    branch: summary.branch,
                }
            }
            Err(spinchain::Error::Diverged { iteration }) => {
                log::warn!("N={n} T={}: diverged at iteration {iteration}", cfg.total_time());
                CellResult {
                    fingerprint: self.fingerprint.clone(),
                    n_sites: n,
                    total_time: cfg.total_time(),
                    final_infidelity: 1.0,
                    iterations_run: iteration,
                    converged: false,
                    diverged: true,
                    average_velocity: None,
                    mean_energy_spread: None,
                    tau_qsl: None,
                    branch: None,
                }
            }
            Err(e) => return Err(e.into()),
        };
        log::info!(
            "N={n} T={}: infidelity {:e} after {} iterations",
            cell.total_time,
            cell.final_infidelity,
            cell.iterations_run
        );
        let text = serde_json::to_string_pretty(&cell).expect("cell serializes") + "\n";
        std::fs::write(&json_path, text).map_err(|e| HarnessError::io(&json_path, e))?;
        Ok(cell)
    }

    /// Coarse descending sweep, then bisection between the shortest passing
    /// time and the failing grid point just below it.
    fn scan_length(&self, n: usize) -> Result<Vec<CellResult>> {
        let scan = self.config.scan.as_ref().expect("scan section checked");
        let edges = (n - 1) as f64;
        let dt = self.config.chain.dt;
        let on_grid = |t: f64| (t / dt).round() * dt;
        let mut cells = Vec::new();
        // Shortest passing time and the failing time right below it.
        let mut pass: Option<f64> = None;
        let mut fail: Option<f64> = None;
        let mut misses = 0usize;
        let mut j = 0usize;
        loop {
            let per_edge = scan.per_edge_max - j as f64 * scan.per_edge_step;
            if per_edge < scan.per_edge_min - 1e-12 {
                break;
            }
            let cell = self.run(n, on_grid(per_edge * edges))?;
            let ok = cell.final_infidelity < scan.threshold;
            let t = cell.total_time;
            cells.push(cell);
            if ok {
                pass = Some(t);
                fail = None;
                misses = 0;
            } else {
                if pass.is_some() && fail.is_none() {
                    fail = Some(t);
                }
                misses += 1;
                if misses >= scan.patience {
                    break;
                }
            }
            j += 1;
        }
        if let (Some(mut hi), Some(mut lo)) = (pass, fail) {
            for _ in 0..scan.bisection_steps {
                let mid = on_grid(0.5 * (lo + hi));
                if mid <= lo || mid >= hi {
                    break;
                }
                let cell = self.run(n, mid)?;
                if cell.final_infidelity < scan.threshold {
                    hi = cell.total_time;
                } else {
                    lo = cell.total_time;
                }
                cells.push(cell);
            }
        }
        Ok(cells)
    }
}

#[derive(Debug)]
pub struct ScanOutcome {
    pub cells: Vec<CellResult>,
    pub star: TqslStar<f64>,
    pub fit: Option<QslFit<f64>>,
    pub bundle: ResultBundle,
}

/// Speed-limit scan over `scan.n_list`, with `workers` chain lengths in
/// flight at once. Completed cells found in `out_dir/cells` are reused.
pub fn scan(config: &RunConfig, out_dir: &Path, workers: usize) -> Result<ScanOutcome> {
    let scan = config
        .scan
        .as_ref()
        .ok_or_else(|| HarnessError::Config("the scan command needs a [scan] section".into()))?;
    let settings = KrotovSettings {
        max_iterations: scan.iterations,
        infidelity_threshold: scan.threshold,
        ..config.krotov_settings()
    };
    let mut out = Output::create(out_dir)?;
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(|e| HarnessError::io(&cells_dir, e))?;
    let runner = CellRunner {
        config,
        fingerprint: scan_fingerprint(config, &settings),
        settings,
        cells_dir,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let mut lengths = scan.n_list.clone();
    lengths.sort_unstable();
    lengths.dedup();
    let per_length: Vec<Result<Vec<CellResult>>> =
        pool.install(|| lengths.par_iter().map(|&n| runner.scan_length(n)).collect());
    let mut cells = Vec::new();
    for r in per_length {
        cells.extend(r?);
    }
    cells.sort_by(|a, b| a.n_sites.cmp(&b.n_sites).then(b.total_time.total_cmp(&a.total_time)));

    let records: Vec<ScanRecord<f64>> = cells.iter().map(CellResult::record).collect();
    write_table(
        &out.path("scan.csv"),
        &["N", "T", "final_infidelity", "iterations"],
        records.iter().map(|r| {
            vec![r.n_sites.to_string(), fmt(r.total_time), fmt(r.final_infidelity), r.iterations_run.to_string()]
        }),
    )?;
    let star = find_tqsl_star(&records, scan.threshold)?;
    let fit = if star.per_n.len() >= 2 { Some(fit_line(&star.per_n, config.chain.coupling)?) } else { None };
    if fit.is_none() {
        log::warn!("fewer than two chain lengths reached the threshold; no line fit");
    }
    let mut rows: Vec<(String, String)> = Vec::new();
    if let Some(f) = &fit {
        rows.push(("slope_a".into(), fmt(f.slope_a)));
        rows.push(("intercept_b".into(), fmt(f.intercept_b)));
        rows.push(("gamma".into(), fmt(f.gamma)));
        rows.push(("r_squared".into(), fmt(f.r_squared)));
    }
    for (n, t) in &star.per_n {
        rows.push((format!("tqsl_star_N{n}"), fmt(*t)));
    }
    for n in &star.missing {
        rows.push((format!("tqsl_star_N{n}"), "NaN".into()));
    }
    rows.push(("threshold".into(), fmt(scan.threshold)));
    rows.push(("iterations_budget".into(), scan.iterations.to_string()));
    rows.push(("grid_per_edge_max".into(), fmt(scan.per_edge_max)));
    rows.push(("grid_per_edge_step".into(), fmt(scan.per_edge_step)));
    rows.push(("grid_per_edge_min".into(), fmt(scan.per_edge_min)));
    rows.push(("grid_bisection_steps".into(), scan.bisection_steps.to_string()));
    rows.push(("grid_patience".into(), scan.patience.to_string()));
    write_quantities(&out.path("fit.csv"), &rows)?;
    for c in &cells {
        let stem = cell_stem(c.n_sites, (c.total_time / config.chain.dt).round() as usize);
        out.files.push(format!("cells/{stem}.json"));
        if !c.diverged {
            out.files.push(format!("cells/{stem}_pulse.csv"));
        }
    }
    let bundle = out.finish("scan", &config.to_toml())?;
    Ok(ScanOutcome { cells, star, fit, bundle })
}

#[derive(Debug)]
pub struct FilterOutcome {
    pub pulse: ControlPulse<f64>,
    pub infidelity_before: f64,
    pub infidelity_after: f64,
    pub clamped_samples: usize,
    pub bundle: ResultBundle,
}

/// Low-passes `pulse_path` at `nu_max` and re-simulates it.
pub fn filter(config: &RunConfig, out_dir: &Path, pulse_path: &Path, nu_max: f64) -> Result<FilterOutcome> {
    if !(nu_max >= 0.0) {
        return Err(HarnessError::Config(format!("--nu-max must be non-negative, got {nu_max}")));
    }
    let pulse = read_pulse(pulse_path)?;
    let cfg = config.chain_with(config.chain.n_sites, pulse.n_steps() as f64 * pulse.dt())?;
    pulse.check_grid(&cfg)?;
    if let Some(t) = config.chain.total_time {
        if (t - cfg.total_time()).abs() > 0.5 * cfg.dt() {
            return Err(spinchain::Error::InvalidArgument(format!(
                "pulse covers T = {}, config says {t}",
                cfg.total_time()
            ))
            .into());
        }
    }
    let initial = basis_state(&cfg, 1)?;
    let target = basis_state(&cfg, cfg.n_sites())?;
    let filtered = lowpass_filter(&pulse, nu_max)?;
    let before = infidelity(&evolve(&cfg, &pulse, &initial)?, &target)?;
    let after = infidelity(&evolve(&cfg, &filtered.pulse, &initial)?, &target)?;

    let mut out = Output::create(out_dir)?;
    write_pulse(&out.path("filtered_pulse.csv"), &filtered.pulse)?;
    if pulse.n_samples() >= 3 {
        let spectra = [
            amplitude_spectrum(pulse.minimum(), pulse.dt())?,
            amplitude_spectrum(pulse.strength(), pulse.dt())?,
            amplitude_spectrum(filtered.pulse.minimum(), pulse.dt())?,
            amplitude_spectrum(filtered.pulse.strength(), pulse.dt())?,
        ];
        let rows = (0..spectra[0].len()).map(|k| {
            let mut row = vec![fmt(spectra[0][k].0)];
            row.extend(spectra.iter().map(|s| fmt(s[k].1)));
            row
        });
        write_table(&out.path("spectrum.csv"), &["nu", "d", "C", "d_filtered", "C_filtered"], rows)?;
    }
    write_quantities(
        &out.path("filter_report.csv"),
        &[
            ("nu_max".into(), fmt(nu_max)),
            ("nyquist".into(), fmt(0.5 / pulse.dt())),
            ("infidelity_before".into(), fmt(before)),
            ("infidelity_after".into(), fmt(after)),
            ("clamped_samples".into(), filtered.clamped_samples.to_string()),
        ],
    )?;
    let bundle = out.finish("filter", &config.to_toml())?;
    Ok(FilterOutcome {
        pulse: filtered.pulse,
        infidelity_before: before,
        infidelity_after: after,
        clamped_samples: filtered.clamped_samples,
        bundle,
    })
}

/// One line of the consolidated report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub source: String,
    pub n_sites: usize,
    pub total_time: f64,
    pub final_infidelity: f64,
    pub nominal_velocity: f64,
    pub average_velocity: Option<f64>,
    pub mean_energy_spread: Option<f64>,
    pub tau_qsl: Option<f64>,
    pub branch: Option<String>,
    /// `gamma (N - 1) tau + b` from a fit in the same directory.
    pub model_time: Option<f64>,
    /// Repeated orthogonal swaps, `(N - 1) pi/(2J)`.
    pub swap_time: f64,
}

fn collect_summaries(dir: &Path, label: &str, rows: &mut Vec<(String, RunSummary)>) -> Result<()> {
    let path = dir.join("summary.json");
    if path.is_file() {
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let s: RunSummary = serde_json::from_str(&text).map_err(|e| HarnessError::format(&path, e))?;
        rows.push((label.to_string(), s));
    }
    let cells = dir.join("cells");
    if cells.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&cells)
            .map_err(|e| HarnessError::io(&cells, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        for p in entries {
            let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
            let c: CellResult = serde_json::from_str(&text).map_err(|e| HarnessError::format(&p, e))?;
            let source = format!("{label}cells/{}", p.file_stem().unwrap_or_default().to_string_lossy());
            rows.push((
                source,
                RunSummary {
                    command: "scan".into(),
                    n_sites: c.n_sites,
                    total_time: c.total_time,
                    coupling: f64::NAN,
                    final_infidelity: c.final_infidelity,
                    iterations: Some(c.iterations_run),
                    converged: Some(c.converged),
                    nominal_velocity: None,
                    average_velocity: c.average_velocity,
                    mean_energy_spread: c.mean_energy_spread,
                    tau_qsl: c.tau_qsl,
                    branch: c.branch,
                },
            ));
        }
    }
    Ok(())
}

fn read_fit(dir: &Path) -> Option<(f64, f64)> {
    let rows = read_quantities(&dir.join("fit.csv")).ok()?;
    let get = |q: &str| rows.iter().find(|(k, _)| k == q).and_then(|(_, v)| v.parse::<f64>().ok());
    Some((get("gamma")?, get("intercept_b")?))
}

#[derive(Debug)]
pub struct ReportOutcome {
    pub rows: Vec<ReportRow>,
    pub bundle: ResultBundle,
}

/// Gathers run summaries and scan cells under `dir` (and its immediate
/// subdirectories) into `report.csv` in `out_dir`.
pub fn report(dir: &Path, out_dir: &Path, coupling: f64) -> Result<ReportOutcome> {
    if !dir.is_dir() {
        return Err(HarnessError::MissingInputs(format!("{} is not a directory", dir.display())));
    }
    let mut found = Vec::new();
    collect_summaries(dir, "", &mut found)?;
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n != "cells"))
        .collect();
    subdirs.sort();
    let mut fits: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    if let Some(f) = read_fit(dir) {
        fits.insert(String::new(), f);
    }
    for sub in &subdirs {
        let label = format!("{}/", sub.file_name().unwrap_or_default().to_string_lossy());
        collect_summaries(sub, &label, &mut found)?;
        if let Some(f) = read_fit(sub) {
            fits.insert(label, f);
        }
    }
    if found.is_empty() {
        return Err(HarnessError::MissingInputs(format!(
            "{} holds no summary.json or cells/*.json (run simulate, optimize or scan first)",
            dir.display()
        )));
    }
    let fit = fits.values().next().copied();
    let mut rows: Vec<ReportRow> = found
        .into_iter()
        .map(|(source, s)| {
            let j = if s.coupling.is_finite() { s.coupling } else { coupling };
            let edges = (s.n_sites - 1) as f64;
            ReportRow {
                source,
                n_sites: s.n_sites,
                total_time: s.total_time,
                final_infidelity: s.final_infidelity,
                nominal_velocity: if s.total_time > 0.0 { edges / s.total_time } else { f64::NAN },
                average_velocity: s.average_velocity,
                mean_energy_spread: s.mean_energy_spread,
                tau_qsl: s.tau_qsl,
                branch: s.branch,
                model_time: fit.and_then(|(g, b)| s.tau_qsl.map(|tau| g * edges * tau + b)),
                swap_time: edges * FRAC_PI_2 / j,
            }
        })
        .collect();
    let mut lengths: Vec<usize> = rows.iter().map(|r| r.n_sites).collect();
    lengths.sort_unstable();
    lengths.dedup();
    for n in lengths {
        let edges = (n - 1) as f64;
        let swap = edges * FRAC_PI_2 / coupling;
        rows.push(ReportRow {
            source: "swap_reference".into(),
            n_sites: n,
            total_time: swap,
            final_infidelity: f64::NAN,
            nominal_velocity: edges / swap,
            average_velocity: None,
            mean_energy_spread: None,
            tau_qsl: Some(FRAC_PI_2 / coupling),
            branch: Some(branch_name(QslBranch::Coupling).into()),
            model_time: Some(swap),
            swap_time: swap,
        });
    }
    let mut out = Output::create(out_dir)?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_else(|| "NaN".into());
    write_table(
        &out.path("report.csv"),
        &["source", "N", "T", "final_infidelity", "v_a", "v_d", "mean_dE", "tau_qsl", "branch", "model_T", "swap_T"],
        rows.iter().map(|r| {
            vec![
                r.source.clone(),
                r.n_sites.to_string(),
                fmt(r.total_time),
                fmt(r.final_infidelity),
                fmt(r.nominal_velocity),
                opt(r.average_velocity),
                opt(r.mean_energy_spread),
                opt(r.tau_qsl),
                r.branch.clone().unwrap_or_default(),
                opt(r.model_time),
                fmt(r.swap_time),
            ]
        }),
    )?;
    let bundle = out.finish("report", &format!("source = {:?}\ncoupling = {coupling:e}\n", dir.display().to_string()))?;
    Ok(ReportOutcome { rows, bundle })
}
