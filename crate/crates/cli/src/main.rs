use clap::{Parser, ValueEnum};
use saddlecross_cli::{run, CliError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Landscape,
    Track,
    Compare,
    Discrete,
    Saddles,
}

/// Saddle-point analysis of tunnelling propagators.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV tables and plot scripts.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for grid scans (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("saddlecross: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let wanted = format!("{:?}", args.command).to_lowercase();
    if cfg.task.name() != wanted {
        return Err(CliError::Config(format!(
            "config holds a `{}` task, not `{wanted}`",
            cfg.task.name()
        )));
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    run(&cfg, &args.out)
}
