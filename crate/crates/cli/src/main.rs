//! `readout`: command-line frontend for the spin-readout toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod grid;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use run::CliError;

#[derive(Debug, Parser)]
#[command(name = "readout", version, about = "Cavity-enhanced spin readout simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Device and run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weak-probe reflection spectrum of the bare and spin-coupled cavity.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Probe detuning grid in GHz.
        #[arg(long, default_value = "-100:100:2", allow_hyphen_values = true)]
        grid: String,
        /// Detuning (GHz) at which the analyzer nulls the bare cavity.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        basis_ghz: f64,
    },
    /// Readout-fidelity sweeps.
    Fidelity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        sweep: Sweep,
        /// Swept values; the default depends on the sweep.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Integration windows in ns for the power-window map.
        #[arg(long, default_value = "10:400:10")]
        windows: String,
        /// Overall detection efficiency for the branching sweep; defaults
        /// to the configured chain.
        #[arg(long)]
        eta: Option<f64>,
        /// Fidelity target for the efficiency crossing.
        #[arg(long, default_value_t = 0.82)]
        target: f64,
    },
    /// Seeded pump-probe counting simulation.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        /// Integration window in ns.
        #[arg(long, default_value_t = 75.0)]
        window: f64,
        /// Probe length in ns; defaults to twice the window.
        #[arg(long)]
        probe_ns: Option<f64>,
        /// Replaces the master-equation pumping time (ns).
        #[arg(long)]
        pump_time_ns: Option<f64>,
        /// Bin width of the spin-up click-time histogram in ns.
        #[arg(long, default_value_t = 1.0)]
        bin_ns: f64,
        /// Number of spin-up records exported to records.csv.
        #[arg(long, default_value_t = 100)]
        records: u64,
    },
    /// Least-squares fits to CSV data.
    Fit {
        /// Needed for pumping-curve fits.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: FitKind,
        /// Two or three columns: x, y[, sigma_y].
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    Detuning,
    Efficiency,
    Branching,
    PowerWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitKind {
    ExpDecay,
    #[value(alias = "saturation")]
    SaturationRecovery,
    Pumping,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("READOUT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::input(format!("READOUT_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Spectrum {
            common,
            grid,
            basis_ghz,
        } => commands::spectrum(&common, &grid, basis_ghz),
        Command::Fidelity {
            common,
            sweep,
            grid,
            windows,
            eta,
            target,
        } => commands::fidelity(&common, sweep, grid.as_deref(), &windows, eta, target),
        Command::Montecarlo {
            common,
            runs,
            window,
            probe_ns,
            pump_time_ns,
            bin_ns,
            records,
        } => commands::montecarlo(
            &common,
            &commands::McFlags {
                runs,
                window,
                probe_ns: probe_ns.unwrap_or(2.0 * window),
                pump_time_ns,
                bin_ns,
                records,
            },
        ),
        Command::Fit {
            config,
            out,
            kind,
            input,
        } => commands::fit(config.as_deref(), out.as_deref(), kind, &input),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { run::EXIT_INPUT as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
