use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfg_core::io::{parse_with_mode, run_config, Mode, RunConfig, EXIT_USAGE};

/// Stationary mean field games on the flat torus.
#[derive(Parser)]
#[command(name = "mfg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` config file. Without one, every key takes its default.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output root; the run goes to `<DIR>/<run_id>`.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Solve one MFG system.
    Solve,
    /// Solve for each exponent in `sweep_alphas` and flag concentration.
    Sweep,
    /// Energy, Pohozaev and Hopf-Cole checks on a saved or fresh solution.
    Validate,
    /// Particle simulation of the optimally controlled diffusion.
    Particles {
        /// Number of particles; overrides `particles_count`.
        #[arg(long)]
        count: Option<usize>,
        /// Time horizon `T`; overrides `particles_horizon`.
        #[arg(long = "horizon", visible_alias = "T")]
        horizon: Option<f64>,
        /// Time step; overrides `particles_dt`.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Pohozaev balance on a ball.
    Pohozaev,
}

impl From<&Command> for Mode {
    fn from(c: &Command) -> Self {
        match c {
            Command::Solve => Mode::Solve,
            Command::Sweep => Mode::Sweep,
            Command::Validate => Mode::Validate,
            Command::Particles { .. } => Mode::Particles,
            Command::Pohozaev => Mode::Pohozaev,
        }
    }
}

fn configure(cli: &Cli) -> Result<RunConfig, String> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_with_mode(&text, (&cli.command).into()).map_err(|e| e.to_string())?;
    if let Some(dir) = &cli.output {
        cfg.output_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Particles { count, horizon, dt } = cli.command {
        cfg.particles_count = count.unwrap_or(cfg.particles_count);
        cfg.particles_horizon = horizon.unwrap_or(cfg.particles_horizon);
        cfg.particles_dt = dt.unwrap_or(cfg.particles_dt);
        cfg.validate().map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let outcome = run_config(&cfg);
    if let Some(dir) = &outcome.run_dir {
        println!("{}", dir.join("manifest.json").display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
