//! Batch front-end for the alphapot toolkit.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

/// Exit status for success, bad input, numerical failure and a violated verdict.
const EXIT_OK: u8 = 0;
const EXIT_INTERNAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VIOLATED: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    AlphaBound,
    Solve,
    Simulate,
    Potential,
    VerifyNe,
    CheckPotential,
    RegimeSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::AlphaBound => "alpha-bound",
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Potential => "potential",
            Command::VerifyNe => "verify-ne",
            Command::CheckPotential => "check-potential",
            Command::RegimeSweep => "regime-sweep",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "alphapot", version, about = "Alpha-potential differential games: bounds, Riccati solves, Monte Carlo checks")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Game config (TOML, or JSON when the file starts with `{`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    /// Euler/RK4 steps; defaults to max(200, ceil(400 T)).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Gauss-Legendre nodes for the auxiliary variable r; 0 samples r per path.
    #[arg(long, default_value_t = 8)]
    pub r_nodes: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub n_list: Vec<usize>,
    /// symmetric, exponential or power_law.
    #[arg(long, default_value = "exponential")]
    pub regime: String,
    #[arg(long, default_value_t = 1.0)]
    pub envelope_c: f64,
    /// Deviations per player and kind for check-potential.
    #[arg(long, default_value_t = 4)]
    pub per_kind: usize,
}

/// Input problem detected by the front-end itself.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return (EXIT_CONFIG, "config");
        }
        if let Some(e) = cause.downcast_ref::<alphapot::Error>() {
            use alphapot::Error as E;
            return match e {
                _ if e.is_numerical() => (EXIT_NUMERICAL, "numerical"),
                E::Schema { .. } | E::Invariant(_) | E::InvalidArgument(_) | E::Dimension(_) | E::GridMismatch(_) => {
                    (EXIT_CONFIG, "config")
                }
                E::Io(_) => (EXIT_CONFIG, "io"),
                _ => (EXIT_INTERNAL, "internal"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (EXIT_CONFIG, "io");
        }
    }
    (EXIT_INTERNAL, "internal")
}

fn configure_workers() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("ALPHAPOT_WORKERS") else { return Ok(()) };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("ALPHAPOT_WORKERS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let res = configure_workers().and_then(|_| {
        commands::check_out_dir(&args.out).map_err(|e| anyhow::Error::new(ConfigError(format!("{e:#}"))))?;
        commands::run(&args)
    });
    match res {
        Ok((status, summary)) => {
            println!("{}", json!({ "command": args.command.name(), "out": args.out, "summary": summary }));
            match status {
                commands::Status::Ok => ExitCode::from(EXIT_OK),
                commands::Status::Violated => ExitCode::from(EXIT_VIOLATED),
            }
        }
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!(
                "{}",
                json!({ "error": { "kind": kind, "message": format!("{e:#}"), "exit_code": code, "command": args.command.name() } })
            );
            ExitCode::from(code)
        }
    }
}
