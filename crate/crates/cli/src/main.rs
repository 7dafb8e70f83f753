use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kdvlab_cli::{run, ConfigError, ExperimentConfig, Manifest, RunError};

#[derive(Parser)]
#[command(name = "kdvlab", version, about = "Damped-driven KdV and effective-equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config, or rerun one from its manifest.json.
    Run {
        input: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for ensembles.
        #[arg(long)]
        threads: Option<usize>,
        /// Check the config and exit.
        #[arg(long)]
        validate_only: bool,
    },
}

fn load(input: &Path) -> Result<ExperimentConfig, RunError> {
    if input.extension().is_some_and(|e| e == "json") {
        return Ok(Manifest::read(input)?.config);
    }
    let text = std::fs::read_to_string(input).map_err(|e| ConfigError(format!("cannot read {}: {e}", input.display())))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn execute(input: &Path, out: Option<PathBuf>, seed: Option<u64>, threads: Option<usize>, validate_only: bool) -> Result<(), RunError> {
    let mut config = load(input)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if validate_only {
        config.plan()?;
        println!("{}: ok ({} mode)", input.display(), config.mode.as_str());
        return Ok(());
    }
    let out = out
        .or_else(|| config.output.clone())
        .ok_or_else(|| ConfigError("no output directory: pass --out or set `output`".into()))?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("--threads {n}: {e}")))?;
    }
    let manifest = run(&config, &out)?;
    println!("{} artifacts written to {}", manifest.artifacts.len() + 1, out.display());
    Ok(())
}

fn main() -> ExitCode {
    let Command::Run {
        input,
        out,
        seed,
        threads,
        validate_only,
    } = Cli::parse().command;
    match execute(&input, out, seed, threads, validate_only) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdvlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
