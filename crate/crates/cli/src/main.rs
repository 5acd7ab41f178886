use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xft_cli::{check_lines, load, output_dir, CliError, Format, Overrides, SweepAxis};

#[derive(Parser)]
#[command(name = "xft", version, about = "Exchange fluctuation theorem laboratory")]
struct Cli {
    /// Output directory (default: config `output.dir`, then $XFT_OUT_DIR, then ./xft-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<Format>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report and tables.
    Run { config: PathBuf },
    /// Run one experiment per value of a parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Evaluate the checks only; nothing is written.
    Verify { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let overrides = Overrides { out: cli.out, seed: cli.seed, formats: cli.format };
    match cli.command {
        Command::Run { config } => {
            let config = load(&config, &overrides)?;
            let artifacts = xft_cli::run(&config)?;
            for line in check_lines(&artifacts.report.checks) {
                println!("{line}");
            }
            println!("wrote {}", output_dir(&config).display());
            Ok(artifacts.report.pass)
        }
        Command::Sweep { config, axis, values } => {
            let config = load(&config, &overrides)?;
            let outcome = xft_cli::sweep(&config, axis, &values)?;
            for (row, run) in outcome.report.summary.iter().zip(&outcome.runs) {
                let failed: Vec<&str> = run.report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                let status = if row.pass { "PASS".to_string() } else { format!("FAIL {}", failed.join(",")) };
                println!("{}={} {status}", axis.name(), row.value);
            }
            println!("wrote {}", output_dir(&config).display());
            Ok(outcome.report.pass)
        }
        Command::Verify { config } => {
            let config = load(&config, &overrides)?;
            let artifacts = xft_cli::verify(&config)?;
            for line in check_lines(&artifacts.report.checks) {
                println!("{line}");
            }
            Ok(artifacts.report.pass)
        }
    }
}
