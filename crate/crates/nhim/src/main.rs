use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nhim::output::resolve_dir;
use nhim::{ConfigError, Experiment, ExperimentConfig, Status};

#[derive(Parser)]
#[command(
    name = "nhim",
    version,
    about = "Normal-form validation and lambda-lemma experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the normal-form conditions and the constant budget of a map.
    Validate(RunArgs),
    /// Find K(eps) for a transversal disk and audit the inclination bounds.
    Lambda(RunArgs),
    /// Run the annulus experiment on a twist model.
    Annulus(RunArgs),
    /// Integrate the Hamiltonian and audit energy, cylinder and exponents.
    Ham(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (falls back to the config, then NHIM_OUT, then ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for mesh propagation.
    #[arg(long)]
    threads: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn execute(experiment: Experiment, args: &RunArgs) -> anyhow::Result<nhim::Outcome> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(e.to_string()))?;
    }
    let dir = resolve_dir(args.out.as_deref(), &config);
    config.out = Some(dir.clone());
    nhim::run(experiment, &config, &dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Validate(a) => (Experiment::Validate, a),
        Command::Lambda(a) => (Experiment::Lambda, a),
        Command::Annulus(a) => (Experiment::Annulus, a),
        Command::Ham(a) => (Experiment::Ham, a),
    };
    match execute(experiment, args) {
        Ok(outcome) => {
            if outcome.status != Status::Success {
                eprintln!("{}: {}", experiment.name(), outcome.message);
            } else if !args.quiet {
                println!("{}: {}", experiment.name(), outcome.message);
            }
            if !args.quiet {
                println!("reports: {}.*", outcome.stem);
            }
            ExitCode::from(outcome.status.code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::of_error(&e).code())
        }
    }
}
