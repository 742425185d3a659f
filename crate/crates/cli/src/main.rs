use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nrrd_cli::commands::EXIT_CONFIG;
use nrrd_cli::{parse_config, run, to_canonical_string};

/// Reaction-diffusion solver for the coupled neutron/temperature system.
#[derive(Parser)]
#[command(name = "nrrd", version)]
struct Args {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print the canonical form of the configuration and exit.
    #[arg(long)]
    print_canonical: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if args.print_canonical {
        print!("{}", to_canonical_string(&config));
        return ExitCode::SUCCESS;
    }
    if let Some(dir) = args.output {
        config.output_dir = dir;
    }
    ExitCode::from(run(&config) as u8)
}
