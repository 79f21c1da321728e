//! Batch front end: parse a run configuration, dispatch the experiment,
//! write tables, heatmaps and a manifest.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use arrayrecoil::ErrorKind;
use thiserror::Error;

use crate::config::{Experiment, RunConfig};
use crate::manifest::{sha256_hex, ErrorRecord, Manifest, Status};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let message = match self {
            CliError::Schema(m) | CliError::Numerical(m) | CliError::Io(m) => m.clone(),
        };
        ErrorRecord { kind: self.kind().to_string(), exit_code: self.exit_code(), message }
    }
}

impl From<arrayrecoil::Error> for CliError {
    fn from(e: arrayrecoil::Error) -> Self {
        match e.kind() {
            ErrorKind::Input => CliError::Schema(e.to_string()),
            ErrorKind::Numerical => CliError::Numerical(e.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Command-line level options.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub experiment: Option<Experiment>,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub verbose: bool,
}

/// Parse and validate without running.
pub fn validate(config_path: &Path, experiment: Option<Experiment>) -> Result<(RunConfig, Experiment), CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| io_err(config_path, e))?;
    let config = RunConfig::from_json_str(&text)?;
    let experiment = config.resolve_experiment(experiment)?;
    config.validate(experiment)?;
    Ok((config, experiment))
}

/// Run one configuration. A manifest is written whenever an output
/// directory is known, including on failure.
pub fn run(opts: &RunOptions) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&opts.config).map_err(|e| io_err(&opts.config, e));
    let parsed = text.and_then(|t| RunConfig::from_json_str(&t));
    let out_dir = opts.out.clone().or_else(|| parsed.as_ref().ok().and_then(|c| c.output.clone()));
    let Some(out_dir) = out_dir else {
        return Err(parsed.err().unwrap_or_else(|| CliError::Schema("no output directory (use --out)".into())));
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;

    let threads = opts.threads.or_else(|| parsed.as_ref().ok().map(|c| c.numerics.threads)).unwrap_or(1);
    let mut manifest = Manifest::new(opts.experiment.map(|e| e.name()), None, threads);
    let result = (|| -> Result<(), CliError> {
        let mut config = parsed.clone()?;
        let experiment = config.resolve_experiment(opts.experiment)?;
        if let Some(t) = opts.threads {
            config.numerics.threads = t;
        }
        config.validate(experiment)?;
        let canonical = serde_json::to_vec(&config).expect("config serialises");
        manifest.experiment = Some(experiment.name().to_string());
        manifest.config_sha256 = Some(sha256_hex(&canonical));
        manifest.threads = config.numerics.threads;
        if experiment == Experiment::Sweep {
            if let Some(prev) = Manifest::read(&out_dir).ok().flatten() {
                if prev.config_sha256 == manifest.config_sha256 && prev.experiment == manifest.experiment {
                    manifest.completed_points = prev.completed_points;
                }
            }
        }
        manifest.write(&out_dir)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.numerics.threads)
            .build()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
        let ctx = experiments::Context { config: &config, out: &out_dir, verbose: opts.verbose };
        pool.install(|| experiments::dispatch(experiment, &ctx, &mut manifest))
    })();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            manifest.status = Status::Ok;
            manifest.write(&out_dir)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.fail(&e);
            manifest.write(&out_dir)?;
            Err(e)
        }
    }
}
