//! The `srf` batch runner: one TOML file describes a run, flags override a few
//! common knobs, and every result lands in the output directory as CSV/JSON.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "srf", version = omega_srf::VERSION, about = "Omega-soliton Ricci flow experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the flow and record diagnostics.
    Run(Common),
    /// Run the identity verification suite.
    Verify(Common),
    /// Scan W along random segments of a convex set.
    Convexity(Common),
    /// Conservation report along a geodesic of the space of metrics.
    Geodesic(Common),
    /// Print stored results as tables.
    Report {
        /// An output directory or a single CSV/JSON file.
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let (mut cfg, text) = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                (RunConfig::parse(&text)?, text)
            }
            None => (RunConfig::default(), String::new()),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.suite.seed = s;
        }
        if let Some(n) = self.n {
            cfg.testbed.n = n;
        }
        if let Some(dt) = self.dt {
            cfg.flow.integrator.dt = dt;
        }
        if let Some(t) = self.t_end {
            cfg.flow.integrator.t_end = t;
        }
        cfg.validate(&text)?;
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(c) => commands::run(&c.resolve()?),
        Command::Verify(c) => commands::verify(&c.resolve()?),
        Command::Convexity(c) => commands::convexity(&c.resolve()?),
        Command::Geodesic(c) => commands::geodesic(&c.resolve()?),
        Command::Report { path } => commands::report(&path, &mut std::io::stdout().lock()),
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("srf: {e}");
            e.exit_code()
        }
    }
}
