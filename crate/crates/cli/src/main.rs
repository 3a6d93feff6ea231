//! `hcw-reach`: compute avoid tubes, slice them, and fly the supervised
//! satellite against them.
//!
//! Exit codes: 0 success, 1 usage/config/input error, 2 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcw_reach::{Axis, StateVec};

#[derive(Debug, Parser)]
#[command(
    name = "hcw-reach",
    version,
    about = "HJ reachability for HCW collision avoidance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Backward reachable tubes.
    #[command(subcommand)]
    Brt(BrtCommand),
    /// Closed-loop simulation.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Debug, Subcommand)]
enum BrtCommand {
    /// Solve the tube described by a config; writes HJF1 fields and solve_stats.json.
    Compute {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir, then `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero-level polylines of a 2D slice as CSV.
    Slice {
        #[arg(long)]
        field: PathBuf,
        /// Fixed coordinate, e.g. `vx=0`. Give exactly two.
        #[arg(long = "fix", value_name = "AXIS=VALUE", value_parser = parse_fix)]
        fix: Vec<(Axis, f64)>,
        /// CSV path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    /// Solved value function (HJF1).
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// zero | worst_case | uniform_random | constant:ax,ay
    #[arg(long)]
    disturbance: Option<String>,
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// One episode; writes trajectory.csv and outcome.json.
    Run {
        #[command(flatten)]
        common: SimArgs,
        /// Initial state, overriding the config.
        #[arg(long, value_name = "X,Y,VX,VY", value_parser = parse_state, allow_hyphen_values = true)]
        initial: Option<StateVec>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo batch; writes a JSON report.
    Sweep {
        #[command(flatten)]
        common: SimArgs,
        /// Number of episodes (defaults to the config's sim.runs).
        #[arg(long)]
        n: Option<usize>,
        /// Report path (defaults to `<output_dir>/report.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_fix(s: &str) -> Result<(Axis, f64), String> {
    let (axis, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected AXIS=VALUE, got `{s}`"))?;
    let axis: Axis = axis.trim().parse().map_err(|e| format!("{e}"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value `{value}`: {e}"))?;
    Ok((axis, value))
}

fn parse_state(s: &str) -> Result<StateVec, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number `{p}`: {e}"))
        })
        .collect::<Result<_, _>>()?;
    let arr: [f64; 4] = parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 comma-separated values, got {}", v.len()))?;
    Ok(StateVec::from(arr))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Brt(BrtCommand::Compute { config, out }) => commands::brt_compute(&config, out),
        Command::Brt(BrtCommand::Slice { field, fix, out }) => {
            commands::brt_slice(&field, &fix, out)
        }
        Command::Sim(SimCommand::Run {
            common,
            initial,
            out,
        }) => commands::sim_run(
            &common.config,
            &common.field,
            common.seed,
            common.disturbance.as_deref(),
            initial,
            out,
        ),
        Command::Sim(SimCommand::Sweep { common, n, out }) => commands::sim_sweep(
            &common.config,
            &common.field,
            common.seed,
            common.disturbance.as_deref(),
            n,
            out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e.chain().any(|c| {
        c.downcast_ref::<hcw_reach::Error>()
            .is_some_and(|e| e.is_numerical())
    });
    if numerical {
        2
    } else {
        1
    }
}
