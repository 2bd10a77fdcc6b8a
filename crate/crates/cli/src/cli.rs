use std::path::PathBuf;

use clap::{Parser, Subcommand};

use eharq::model::Protocol;

use crate::commands::{self, Output, PolicyKind};
use crate::config::{parse_grid, ExperimentConfig};
use crate::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "eharq", version, about = "Reception policies for ARQ links with energy harvesting receivers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_protocol)]
    pub protocol: Option<Protocol>,
    /// Harvest probability; a grid for sweep-rho.
    #[arg(long, global = true)]
    pub rho: Option<String>,
    /// Throughput floor; a grid for sweep-tth.
    #[arg(long, global = true)]
    pub tth: Option<String>,
    /// Feedback cost in quanta; a grid for sweep-tth.
    #[arg(long, global = true)]
    pub ef: Option<String>,
    /// Maximum number of transmission attempts.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub horizon: Option<u64>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true)]
    pub imax: Option<usize>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Optimal policy at one operating point (JSON report).
    Solve,
    /// Monte Carlo run of the optimal or myopic policy (JSON report).
    Simulate {
        #[arg(long, default_value = "optimal")]
        policy: PolicyKind,
    },
    /// Drop probability over the harvest-probability grid (CSV).
    SweepRho,
    /// Success probability over the throughput-floor grid (CSV).
    SweepTth,
    /// Acceptance checks; exit code 1 if any fails.
    Verify,
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse()
}

fn single(key: &str, text: &str) -> Result<f64, CliError> {
    match parse_grid(key, text)?[..] {
        [v] => Ok(v),
        _ => Err(CliError::Config(format!("--{key} takes a single value here"))),
    }
}

impl Cli {
    /// Configuration file (or defaults) with the command-line overrides.
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.protocol {
            cfg.protocol = p;
        }
        if let Some(text) = &self.rho {
            match self.command {
                Command::SweepRho => cfg.rho_grid = parse_grid("rho", text)?,
                _ => cfg.rho = single("rho", text)?,
            }
        }
        if let Some(text) = &self.tth {
            match self.command {
                Command::SweepTth => cfg.tth_grid = parse_grid("tth", text)?,
                _ => cfg.tth = single("tth", text)?,
            }
        }
        if let Some(text) = &self.ef {
            match self.command {
                Command::SweepTth => cfg.set("ef_grid", text)?,
                _ => cfg.set("ef", text)?,
            }
        }
        if let Some(k) = self.k {
            cfg.max_attempts = k;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.imax {
            cfg.imax = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        Ok(cfg)
    }

    pub fn execute(&self) -> Result<(ExperimentConfig, Output), CliError> {
        let cfg = self.config()?;
        let out = match &self.command {
            Command::Solve => commands::run_solve(&cfg)?,
            Command::Simulate { policy } => commands::run_simulate(&cfg, *policy)?,
            Command::SweepRho => commands::run_sweep_rho(&cfg)?,
            Command::SweepTth => commands::run_sweep_tth(&cfg)?,
            Command::Verify => {
                cfg.validate()?;
                commands::run_verify(&commands::verify_options(&cfg))?
            }
        };
        Ok((cfg, out))
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::BAD_CONFIG } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.execute() {
        Ok((cfg, out)) => {
            let verify = matches!(cli.command, Command::Verify);
            match &cfg.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &out.body) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return exit::IO;
                    }
                    println!("{}", out.summary);
                }
                None if verify => println!("{}", out.summary),
                None => print!("{}", out.body),
            }
            if out.code == exit::INFEASIBLE {
                eprintln!("infeasible: {}", out.summary);
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
