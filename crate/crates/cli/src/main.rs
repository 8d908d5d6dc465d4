use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mmfe_cli::{run, CliError, ExperimentConfig, Mode};

/// Forecast-value experiments for the building-temperature example.
#[derive(Debug, Parser)]
#[command(name = "mmfe", version)]
struct Args {
    /// TOML experiment file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps and simulation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow sweep ranges that leave out the base parameter value.
    #[arg(long)]
    allow_off_default: bool,
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(s) = args.seed {
        cfg.sim.seed = s;
    }
    if let Some(o) = args.out {
        cfg.output_path = o;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = cfg.resolve(args.allow_off_default)?;
    run(&cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error category=config: {}", e.kind());
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error category={}: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
