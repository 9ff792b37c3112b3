use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use singular_hjb::cli::{self, parse_config, RunConfig};

#[derive(Parser)]
#[command(name = "singular-hjb", version, about = "Singular-terminal HJB solver and verification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the PDE; emit surface, envelope table and sandwich report.
    Solve(CommonArgs),
    /// Separable ODE benchmark against the solved surface.
    Benchmark(CommonArgs),
    /// Simulate the feedback policy for each configured y0 on shared noise.
    Simulate(CommonArgs),
    /// Run the full verification battery.
    Verify(CommonArgs),
    /// Emit the envelope table only.
    Envelopes(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the `key = value` run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo path count override.
    #[arg(long)]
    paths: Option<usize>,
}

fn load(args: &CommonArgs) -> Result<RunConfig, cli::RunError> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(paths) = args.paths {
        cfg.n_paths = paths;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let (sub, args) = match &parsed.command {
        Command::Solve(a) => (cli::Subcommand::Solve, a),
        Command::Benchmark(a) => (cli::Subcommand::Benchmark, a),
        Command::Simulate(a) => (cli::Subcommand::Simulate, a),
        Command::Verify(a) => (cli::Subcommand::Verify, a),
        Command::Envelopes(a) => (cli::Subcommand::Envelopes, a),
    };

    let cfg = match load(args) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };

    match cli::run(sub, &cfg) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for artifact in &outcome.artifacts {
                println!("wrote {}", artifact.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
