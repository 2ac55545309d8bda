// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctcoint::cli::{load_config, run, Command};

#[derive(Parser)]
#[command(name = "ctcoint", version, about = "Continuous-time cointegration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate factor paths and write paths.csv
    Simulate(Common),
    /// Classify the candidate vector `c` and write report.txt (and cf.csv)
    CheckCoint(Common),
    /// Evaluate forward curves and write forward_NNN.csv
    Forward(Common),
    /// Simulate spread curves and write curves.csv and curves.meta
    Curve(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::CheckCoint(a) => (Command::CheckCoint, a),
        Cmd::Forward(a) => (Command::Forward, a),
        Cmd::Curve(a) => (Command::Curve, a),
    };
    let result = load_config(&args.config, args.seed, args.paths).and_then(|cfg| run(&cfg, command, &args.out));
    match result {
        Ok(summary) => {
            for (k, v) in summary.report.iter().filter(|(k, _)| k == "verdict") {
                println!("{k}: {v}");
            }
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
