//! Thin command-line front end: pick a command and a JSON config, run it,
//! map failures to stable exit codes (2 config, 3 blow-up, 4 stage
//! failure). Log verbosity comes from the `SG_LOG` environment variable.

use clap::{Parser, Subcommand};
use sgflow::runner::{
    run_control, run_ladder, run_relax, run_simulate, ControlConfig, LadderConfig, RelaxConfig,
    RunnerError, SimulateConfig,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "sgflow", about = "Second-grade fluid simulation and control synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the controlled system and export the trajectory.
    Simulate(CommonArgs),
    /// Relaxation study: oscillation-defect decay over a k-list.
    Relax(CommonArgs),
    /// Build and verify a saturation-ladder certificate.
    Ladder(CommonArgs),
    /// Synthesize a low-mode control steering between two states.
    Control(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, RunnerError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunnerError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunnerError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg: SimulateConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            run_simulate(&cfg, &args.out)
        }
        Command::Relax(args) => {
            let mut cfg: RelaxConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            run_relax(&cfg, &args.out)
        }
        Command::Ladder(args) => {
            let cfg: LadderConfig = load_config(&args.config)?;
            run_ladder(&cfg, &args.out)
        }
        Command::Control(args) => {
            let mut cfg: ControlConfig = load_config(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            run_control(&cfg, &args.out)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SG_LOG")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
