use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinchain_harness::{commands, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "spinchain", version, about = "Spin-chain excitation transfer: simulate, optimize, scan")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the baseline pulse and write its trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `outputs.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Krotov-optimize the transfer.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resume from this pulse instead of the baseline.
        #[arg(long)]
        pulse: Option<PathBuf>,
    },
    /// Scan transfer times per chain length and fit the speed limit.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Chain lengths processed concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Low-pass a pulse and re-simulate it.
    Filter {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pulse: PathBuf,
        /// Cutoff frequency (cycles per unit time, in units of J).
        #[arg(long = "nu-max")]
        nu_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the runs found in a result directory.
    Report {
        /// Directory holding simulate/optimize/scan outputs.
        dir: PathBuf,
        /// Where to write report.csv; defaults to DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Coupling used for rows that do not record it.
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
    },
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.outputs.directory.clone())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let r = commands::simulate(&cfg, &out_dir(&cfg, out))?;
            println!("final fidelity {:.6}", 1.0 - r.summary.final_infidelity);
        }
        Command::Optimize { config, out, pulse } => {
            let cfg = RunConfig::load(&config)?;
            let r = commands::optimize(&cfg, &out_dir(&cfg, out), pulse.as_deref())?;
            println!(
                "infidelity {:e} after {} iterations (converged: {})",
                r.summary.final_infidelity, r.result.iterations_run, r.result.converged
            );
        }
        Command::Scan { config, out, workers } => {
            let cfg = RunConfig::load(&config)?;
            let r = commands::scan(&cfg, &out_dir(&cfg, out), workers)?;
            for (n, t) in &r.star.per_n {
                println!("N={n}: T* = {t}");
            }
            for n in &r.star.missing {
                println!("N={n}: no scanned time reached the threshold");
            }
            if let Some(f) = r.fit {
                println!("T* = {:.4} (N-1) + {:.4}, gamma = {:.4}, r^2 = {:.4}", f.slope_a, f.intercept_b, f.gamma, f.r_squared);
            }
        }
        Command::Filter { config, pulse, nu_max, out } => {
            let cfg = RunConfig::load(&config)?;
            let r = commands::filter(&cfg, &out_dir(&cfg, out), &pulse, nu_max)?;
            println!("infidelity {:e} -> {:e}", r.infidelity_before, r.infidelity_after);
        }
        Command::Report { dir, out, coupling } => {
            let target = out.unwrap_or_else(|| dir.clone());
            let r = commands::report(Path::new(&dir), &target, coupling)?;
            println!("{} rows written to {}", r.rows.len(), target.join("report.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
