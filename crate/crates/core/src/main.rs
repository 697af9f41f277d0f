use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmkey::cli::{self, CliError};

#[derive(Parser)]
#[command(name = "swarmkey", version, about = "Unauthorized-drone detection: simulate, evaluate, inspect packets")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write events/roster/trace CSVs and a report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Accuracy/precision/recall at each threshold of a score,label CSV.
    Sweep {
        scores: PathBuf,
        /// a:b:step, inclusive
        #[arg(long)]
        thresholds: String,
    },
    /// ROC and precision-recall points plus AUC for a score,label CSV.
    Roc {
        scores: PathBuf,
        /// Write roc.csv and pr.csv here instead of printing them.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Derive the key for a drone id and position and print its packet.
    Keygen {
        id: u16,
        #[arg(allow_hyphen_values = true)]
        lat: f64,
        #[arg(allow_hyphen_values = true)]
        lon: f64,
        #[arg(allow_hyphen_values = true)]
        alt: f64,
    },
    /// Decode a 34-character packet hex string.
    Decode { hex: String },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, seed, out_dir } => {
            print!("{}", cli::cmd_run(&scenario, seed, &out_dir)?.render());
        }
        Command::Sweep { scores, thresholds } => print!("{}", cli::cmd_sweep(&scores, &thresholds)?),
        Command::Roc { scores, out_dir } => {
            let out = cli::cmd_roc(&scores)?;
            match out_dir {
                Some(dir) => {
                    let io = |source| CliError::Io { path: dir.clone(), source };
                    std::fs::create_dir_all(&dir).map_err(io)?;
                    std::fs::write(dir.join("roc.csv"), &out.roc_csv).map_err(io)?;
                    std::fs::write(dir.join("pr.csv"), &out.pr_csv).map_err(io)?;
                }
                None => print!("{}\n{}\n", out.roc_csv, out.pr_csv),
            }
            println!("{}", out.auc_line());
        }
        Command::Keygen { id, lat, lon, alt } => print!("{}", cli::cmd_keygen(id, lat, lon, alt)?),
        Command::Decode { hex } => print!("{}", cli::cmd_decode(&hex)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
