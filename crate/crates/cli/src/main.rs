use std::path::PathBuf;
use std::process::ExitCode;

use arrayrecoil_cli::config::{Experiment, RunConfig};
use arrayrecoil_cli::{run, validate, CliError, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arrayrecoil", version, about = "Collective decay and photon recoil in atomic arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `numerics.threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Reserved; every experiment is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenmode table with per-mode recoil.
    Eigenmodes(Common),
    /// Recoil from an undriven decay.
    Decay(Common),
    /// Recoil and excitation pattern from a Gaussian pulse.
    Pulse(Common),
    /// Steady-state recoil rates and reflectance.
    Steady(Common),
    /// Cavity mode, center-atom recoil and finesse.
    Cavity(Common),
    /// Tabulate a quantity over one or two parameter grids.
    Sweep(Common),
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Experiment to validate against; defaults to the config's field.
        #[arg(long)]
        experiment: Option<String>,
        /// Print the configuration schema instead.
        #[arg(long)]
        schema: bool,
    },
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&e.record()).expect("record serialises"));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Eigenmodes(c) => (Experiment::Eigenmodes, c),
        Command::Decay(c) => (Experiment::Decay, c),
        Command::Pulse(c) => (Experiment::Pulse, c),
        Command::Steady(c) => (Experiment::Steady, c),
        Command::Cavity(c) => (Experiment::Cavity, c),
        Command::Sweep(c) => (Experiment::Sweep, c),
        Command::Validate { config, experiment, schema } => {
            if schema {
                println!("{}", serde_json::to_string_pretty(&RunConfig::schema()).expect("schema"));
                return ExitCode::SUCCESS;
            }
            let Some(config) = config else {
                return report(&CliError::Schema("validate needs --config or --schema".into()));
            };
            let requested = match experiment.as_deref().map(|e| serde_json::from_value(serde_json::Value::from(e))) {
                None => None,
                Some(Ok(e)) => Some(e),
                Some(Err(_)) => return report(&CliError::Schema(format!("unknown experiment {experiment:?}"))),
            };
            return match validate(&config, requested) {
                Ok((_, e)) => {
                    println!("ok: {}", e.name());
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            };
        }
    };
    let opts = RunOptions {
        experiment: Some(experiment),
        config: common.config,
        out: common.out,
        threads: common.threads,
        verbose: common.verbose,
    };
    let _ = common.seed;
    match run(&opts) {
        Ok(m) => {
            if opts.verbose {
                eprintln!("done in {:.1} s, {} files", m.wall_time_s, m.files.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
