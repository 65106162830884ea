use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgd_lab::cli::{self, Overrides, Status};

#[derive(Parser)]
#[command(
    name = "sgd-lab",
    version,
    about = "Stochastic game dynamics experiments"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the number of Monte Carlo runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Print the catalog of builtin games.
    List,
}

fn main() -> ExitCode {
    match Args::parse().command {
        Command::List => {
            print!("{}", cli::render_catalog());
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            out_dir,
            runs,
        } => {
            let report = cli::run(
                &config,
                &Overrides {
                    seed,
                    out_dir,
                    runs,
                },
            );
            if report.status == Status::Success {
                println!("{}", report.message);
            } else {
                eprintln!("sgd-lab: {}", report.message);
            }
            ExitCode::from(report.status.code() as u8)
        }
    }
}
