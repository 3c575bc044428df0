use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemoflux::harness::studies::{
    fit_decay_csv, write_cross_validate, write_delta_sweep, write_refinement, write_single,
    write_theta_scan,
};
use chemoflux::harness::{self, ConfigError, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "chemoflux", version, about = "Chemotaxis flux solver and study runner")]
struct Cli {
    /// Worker threads (1 gives reproducible scheduling).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated snapshot times (overrides output.snapshot_times).
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: diagnostics, decay summary, snapshots.
    Run(Common),
    /// Mollifier-width sweep.
    SweepDelta(Common),
    /// Temporal and spatial convergence orders.
    Refine(Common),
    /// Original vs transformed solver agreement.
    Xval(Common),
    /// Amplitude ladder and stability frontier.
    ScanTheta(Common),
    /// Exponential fit of one column of a diagnostics CSV.
    FitDecay {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "c_linf")]
        column: String,
        /// Fit window as `lo,hi`.
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 20.0])]
        window: Vec<f64>,
    },
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
    let mut cfg = ExperimentConfig::from_path(&c.config)?;
    if let Some(t) = &c.snapshot_times {
        cfg.output.snapshot_times = t.clone();
    }
    cfg.validate()?;
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn report(out: &Path) {
    eprintln!("results written to {}", out.display());
}

fn dispatch(cmd: Command) -> Result<i32, HarnessError> {
    match cmd {
        Command::Run(c) => {
            let (cfg, out) = load(&c)?;
            let run = harness::run_single(&cfg)?;
            write_single(&out, &cfg, &run)?;
            eprintln!(
                "{} after {} steps (t = {})",
                run.trajectory.outcome.label(),
                run.trajectory.steps,
                run.trajectory.final_state.t
            );
            report(&out);
            Ok(run.exit_code())
        }
        Command::SweepDelta(c) => {
            let (cfg, out) = load(&c)?;
            let s = harness::run_delta_sweep(&cfg)?;
            write_delta_sweep(&out, &cfg, &s)?;
            eprintln!("cauchy: {}", s.is_cauchy());
            report(&out);
            Ok(0)
        }
        Command::Refine(c) => {
            let (cfg, out) = load(&c)?;
            let r = harness::run_refinement(&cfg)?;
            write_refinement(&out, &cfg, &r)?;
            for row in r.temporal.iter().chain(&r.spatial) {
                eprintln!("level {:e} error {:e} order {:?}", row.level, row.error, row.order);
            }
            report(&out);
            Ok(0)
        }
        Command::Xval(c) => {
            let (cfg, out) = load(&c)?;
            let rows = harness::run_cross_validate(&cfg)?;
            write_cross_validate(&out, &cfg, &rows)?;
            for r in &rows {
                eprintln!("N {} u {:e} v {:e}", r.n, r.u_discrepancy, r.v_discrepancy);
            }
            report(&out);
            Ok(0)
        }
        Command::ScanTheta(c) => {
            let (cfg, out) = load(&c)?;
            let rows = harness::run_theta_scan(&cfg)?;
            write_theta_scan(&out, &cfg, &rows)?;
            for r in &rows {
                eprintln!("amplitude {:e} theta0 {:e} {}", r.amplitude, r.theta0, r.status);
            }
            report(&out);
            Ok(0)
        }
        Command::FitDecay { csv, column, window } => {
            let [lo, hi] = window[..] else {
                return Err(HarnessError::Config(ConfigError::Invalid {
                    field: "--window".into(),
                    reason: format!("needs two values lo,hi, got {}", window.len()),
                }));
            };
            let fit = fit_decay_csv(&csv, &column, [lo, hi])?;
            println!("quantity,t_lo,t_hi,rate,prefactor,residual,samples");
            println!(
                "{},{:e},{:e},{:e},{:e},{:e},{}",
                fit.quantity, fit.window.0, fit.window.1, fit.rate, fit.prefactor, fit.residual, fit.samples
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
