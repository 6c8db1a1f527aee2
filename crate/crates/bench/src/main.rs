use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lpiopt_bench::config::{ExperimentConfig, InterpCheckConfig};
use lpiopt_bench::tables::{interp_check, rate_csv, scaling_csv};
use lpiopt_bench::{run_experiment, scaling_table, BenchError, Regime};

#[derive(Parser)]
#[command(name = "lpiopt", version, about = "Interpolated-gradient descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizers of an experiment config and write reports.
    Optimize { config: PathBuf },
    /// Measure the interpolation error decay for a synthetic target.
    InterpCheck { config: PathBuf },
    /// Spectral summary of the integral moment matrix.
    SpectraCheck {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        l: u32,
    },
    /// Bound values across sample sizes.
    ScalingTable {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_delimiter = ',')]
        n: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Optimize { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out = run_experiment(&cfg)?;
            println!("{}", out.output_dir.display());
        }
        Command::InterpCheck { config } => {
            let cfg = InterpCheckConfig::from_path(&config)?;
            let report = interp_check(&cfg)?;
            if let Some(dir) = &cfg.output_dir {
                std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join("error_vs_m.csv"), rate_csv(&report.rows)))
                    .map_err(|e| BenchError::Config(format!("cannot write to {}: {e}", dir.display())))?;
            }
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::SpectraCheck { d, l } => {
            let report = lpiopt_core::spectra::spectra_check(d, l).map_err(|e| BenchError::Input(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::ScalingTable { alpha, beta, tau, gamma, n } => {
            let regime = Regime { alpha, beta, tau, gamma };
            for v in regime.violations() {
                eprintln!("warning: {v}");
            }
            print!("{}", scaling_csv(&scaling_table(regime, &n)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
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
