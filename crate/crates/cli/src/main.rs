use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use reloc_ldp_cli::config::ExperimentConfig;
use reloc_ldp_cli::experiments::schema;
use reloc_ldp_cli::{run, validate, CliError};

#[derive(Parser)]
#[command(name = "reloc-ldp", version, about = "Quenched large-deviation experiments for relocating Markov processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads (default: RELOC_LDP_WORKERS, then all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: the config's `output`, then the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the CSV header of a table kind.
    Schema { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, workers, out } => ExperimentConfig::from_path(&config)
            .and_then(|cfg| run(&cfg, workers, out.as_deref()))
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            }),
        Command::Validate { config } => ExperimentConfig::from_path(&config)
            .and_then(|cfg| validate(&cfg).map(|_| cfg))
            .map(|cfg| println!("ok: {} experiment", cfg.experiment)),
        Command::Schema { kind } => match schema(&kind) {
            Some(header) => {
                println!("{}", header.join(","));
                Ok(())
            }
            None => Err(CliError::Invalid(format!("unknown table kind '{kind}'"))),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reloc-ldp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
