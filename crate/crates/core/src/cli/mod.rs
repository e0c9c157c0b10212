//! Batch runner: `translab <kind> [--config file.toml] [--out dir]`.
//!
//! Exit codes: 0 when every assertion passes, 1 on an assertion or
//! experiment failure, 2 on a configuration error.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{validate, ExperimentConfig, Kind};
pub use run::{run, Assertion, RunReport};

use crate::error::Error;

#[derive(Parser, Debug)]
#[command(name = "translab", version, about = "Transport equation experiments")]
pub struct Cli {
    /// TOML experiment configuration (defaults apply to missing keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Divides cell counts and multiplies time steps.
    #[arg(long, global = true)]
    pub resolution_scale: Option<f64>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the forward problem for the first initial datum.
    Forward,
    /// Build the layer next to the observed patch and classify its boundary.
    Subdomain,
    /// Tabulate the Carleman ledger over a family and fit (C, s0).
    CarlemanVerify,
    /// Recover H from n solutions.
    ReconstructH,
    /// Recover p from one solution.
    ReconstructP,
    /// Hölder fit of error against boundary-data distance.
    StabilitySweep,
    /// Gronwall bound for the rate system.
    EnergyCheck,
    /// Lipschitz source recovery for one data configuration.
    CaseExperiment,
    /// Nonzero solution with vanishing initial and boundary data.
    DemoNonuniqueness,
    /// List every violated constraint without running.
    Validate {
        /// Experiment kind to validate for (defaults to the configured one).
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

impl Command {
    fn kind(&self) -> Option<Kind> {
        Some(match self {
            Command::Forward => Kind::Forward,
            Command::Subdomain => Kind::Subdomain,
            Command::CarlemanVerify => Kind::CarlemanVerify,
            Command::ReconstructH => Kind::ReconstructH,
            Command::ReconstructP => Kind::ReconstructP,
            Command::StabilitySweep => Kind::StabilitySweep,
            Command::EnergyCheck => Kind::EnergyCheck,
            Command::CaseExperiment => Kind::CaseExperiment,
            Command::DemoNonuniqueness => Kind::DemoNonuniqueness,
            Command::Validate { .. } | Command::DefaultConfig => return None,
        })
    }
}

/// Exit status for an error raised while running.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Configuration(_) | Error::Parameter(_) | Error::Arity { .. } | Error::Format(_) => 2,
        _ => 1,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.resolution_scale {
        cfg = cfg.rescaled(s)?;
    }
    Ok(cfg)
}

/// Parse `args`, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match &cli.command {
        Command::DefaultConfig => match cfg.to_toml() {
            Ok(s) => {
                print!("{s}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Validate { kind } => {
            let Some(kind) = kind.or(cfg.kind) else {
                eprintln!("error: no experiment kind given (use --kind or set kind in the config)");
                return 2;
            };
            let v = validate(&cfg, kind);
            for line in &v {
                println!("{line}");
            }
            if !cli.quiet && v.is_empty() {
                println!("valid {} configuration", kind.name());
            }
            if v.is_empty() {
                0
            } else {
                2
            }
        }
        cmd => {
            let kind = cmd.kind().expect("experiment command");
            if let Some(k) = cfg.kind {
                if k != kind {
                    eprintln!("error: kind: config declares {} but {} was requested", k.name(), kind.name());
                    return 2;
                }
            }
            let v = validate(&cfg, kind);
            if !v.is_empty() {
                for line in &v {
                    eprintln!("invalid: {line}");
                }
                return 2;
            }
            match run(&cfg, kind, &cli.out) {
                Ok(report) => {
                    if !cli.quiet {
                        for a in &report.assertions {
                            println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
                        }
                        println!("report: {}", cli.out.join("report.json").display());
                    }
                    for a in report.failures() {
                        eprintln!("assertion failed: {}", a.name);
                    }
                    u8::from(!report.passed)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
    }
}
