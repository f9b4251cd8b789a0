use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use multiport_cli::{run, write_outputs, CliError, ExperimentConfig, RunContext};

/// Pair-intensity correlations, bounds and witnesses for multiport interferometers.
#[derive(Debug, Parser)]
#[command(name = "multiport", version)]
struct Args {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the optimizer convergence trace to stderr.
    #[arg(long, short)]
    verbose: bool,
}

fn execute(args: &Args) -> Result<String, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let base_dir = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let ctx = RunContext { base_dir, verbose: args.verbose };
    let output = run(&config, &ctx)?;
    write_outputs(&output, &config, &ctx, args.out.as_deref())?;
    if let Some(trace) = &output.trace {
        eprint!("{trace}");
    }
    Ok(output.summary)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("multiport: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
