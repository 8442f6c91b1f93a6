//! Command-line front end: configuration, tabular output and run manifests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod table;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{canonical_toml, parse_config, ResolvedConfig};
use crate::manifest::{describe, unix_now, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "clocklab",
    version,
    about = "Exclusion-process simulations checked against their hydrodynamic limits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed base.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; affects wall time only.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate ensembles and write their averaged profiles.
    Simulate(RunArgs),
    /// Solve the macroscopic equation and write the solution.
    SolvePde(RunArgs),
    /// Compare ensemble profiles with the macroscopic solution across ring sizes.
    Converge(RunArgs),
    /// Martingale statistics and generator bounds across ring sizes.
    Martingale(RunArgs),
    /// Weak-form residuals of empirical and PDE densities.
    Residual(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::SolvePde(_) => "solve-pde",
            Command::Converge(_) => "converge",
            Command::Martingale(_) => "martingale",
            Command::Residual(_) => "residual",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::SolvePde(a)
            | Command::Converge(a)
            | Command::Martingale(a)
            | Command::Residual(a) => a,
        }
    }
}

fn load(args: &RunArgs) -> Result<ResolvedConfig, String> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let config = parse_config(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    Ok(match args.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    })
}

type Runner = fn(&ResolvedConfig, &Path, &mut dyn FnMut(&str)) -> std::io::Result<Outcome>;

fn execute(command: &Command) -> i32 {
    let args = command.args();
    let config = match load(args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return EXIT_RUNTIME;
    }
    let threads = args.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let runner: Runner = match command {
        Command::Simulate(_) => commands::simulate,
        Command::SolvePde(_) => commands::solve_pde,
        Command::Converge(_) => commands::converge,
        Command::Martingale(_) => commands::martingale,
        Command::Residual(_) => commands::residual,
    };
    let started = unix_now();
    let mut progress = |line: &str| eprintln!("[{}] {line}", command.name());
    let outcome = pool.install(|| runner(&config, &args.out, &mut progress));
    let (outcome, io_error) = match outcome {
        Ok(o) => (o, None),
        Err(e) => (
            Outcome {
                partial: true,
                error: Some(e.to_string()),
                ..Outcome::default()
            },
            Some(e),
        ),
    };
    let mut outputs = Vec::new();
    for f in &outcome.files {
        match describe(&args.out, f) {
            Ok(d) => outputs.push(d),
            Err(e) => eprintln!("warning: cannot digest {f}: {e}"),
        }
    }
    let manifest = RunManifest {
        tool: "clocklab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        config: canonical_toml(&config),
        seed: config.seed(),
        threads: pool.current_num_threads(),
        started_unix: started,
        finished_unix: unix_now(),
        stages: outcome.stages.clone(),
        outputs,
        partial: outcome.partial,
        error: outcome.error.clone(),
    };
    if let Err(e) = manifest.write(&args.out.join("manifest.json")) {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_RUNTIME;
    }
    println!("{}", outcome.summary);
    if let Some(e) = io_error {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    EXIT_OK
}

/// Parses `argv` and runs the selected command, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => execute(&cli.command),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
