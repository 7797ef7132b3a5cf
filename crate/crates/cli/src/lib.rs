//! Experiment driver: configuration handling, command dispatch and run manifests.

pub mod commands;
pub mod config;
pub mod manifest;

use clap::Parser;
use config::{Command, ConfigMap, RunConfig};
use critfield::Error;
use std::path::PathBuf;
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

/// Environment fallback for the worker-thread cap.
pub const THREADS_ENV: &str = "CRITFIELD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "critfield", version, about = "Critical-dimension Gaussian field experiments")]
pub struct Cli {
    /// criteria | simulate | sojourn | construct | cover | hit
    pub command: String,
    /// Configuration file (key = value lines, optional [section] headers).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 4 when a result is inconclusive.
    #[arg(long)]
    pub strict: bool,
    /// Overrides: `key=value` or `section.key=value`.
    pub overrides: Vec<String>,
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Budget(_) | Error::Format(_) => EXIT_DOMAIN,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_IO,
    }
}

/// Merges the config file and the command-line overrides (flags win).
pub fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let command: Command = cli.command.parse()?;
    let mut map = match &cli.config {
        Some(path) => ConfigMap::parse(&std::fs::read_to_string(path)?)?,
        None => ConfigMap::default(),
    };
    for arg in &cli.overrides {
        map.apply_override(command, arg)?;
    }
    if let Some(out) = &cli.out {
        map.set(config::TOP, "out", &out.to_string_lossy());
    }
    if cli.strict {
        map.set(config::TOP, "strict", "true");
    }
    RunConfig::from_map(command, map)
}

fn thread_cap(cfg: &RunConfig) -> Result<Option<usize>, Error> {
    if cfg.threads.is_some() {
        return Ok(cfg.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Domain(format!("{THREADS_ENV} = '{v}' is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs one command and returns the process exit status. Diagnostics go to stderr.
pub fn run(cli: Cli) -> i32 {
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("critfield: {e}");
            return exit_code(&e);
        }
    };
    let threads = match thread_cap(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("critfield: {e}");
            return exit_code(&e);
        }
    };
    if let Some(n) = threads {
        // Fails only if the global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("critfield: cannot create {}: {e}", cfg.out.display());
        return EXIT_IO;
    }
    let start = Instant::now();
    let outcome = commands::dispatch(&cfg);
    let wall = start.elapsed().as_secs_f64();
    let (status, summary, error) = match &outcome {
        Ok(o) if o.inconclusive && cfg.strict => (EXIT_INCONCLUSIVE, Some(o), None),
        Ok(o) => (EXIT_OK, Some(o), None),
        Err(e) => (exit_code(e), None, Some(e.to_string())),
    };
    if let Some(e) = &error {
        eprintln!("critfield: {e}");
    }
    if status == EXIT_INCONCLUSIVE {
        eprintln!("critfield: inconclusive result with strict=true");
    }
    let m = manifest::Manifest::new(&cfg, threads, wall, status, summary, error);
    if let Err(e) = m.write(&cfg.out) {
        eprintln!("critfield: cannot write manifest: {e}");
        return if status == EXIT_OK { EXIT_IO } else { status };
    }
    status
}
