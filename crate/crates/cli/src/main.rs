use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homav_cli::{parse_config, run_experiment, RunError};

#[derive(Parser, Debug)]
#[command(author, version, about = "Plain vs antithetic Monte Carlo for random nonlinear homogenization")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `seed` from the config
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Also write per-quantity series under `<output_dir>/plots`
        #[arg(long)]
        emit_plots: bool,
    },
}

fn run(command: Command) -> Result<(), RunError> {
    let Command::Run { config, output_dir, seed, threads, emit_plots } = command;
    let mut cfg = parse_config(&config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .expect("thread pool");
    let results = pool.install(|| run_experiment(&cfg, emit_plots, |msg| eprintln!("{msg}")))?;
    for size in &results.sizes {
        let value = size.report.get(homav_core::QuantityKey::Value);
        eprintln!("2N = {}: R(value) = {:.3}, {:.1} s", size.two_n, value.ratio, size.wall_time_s);
    }
    eprintln!("wrote {}", cfg.output_dir.join("results.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
