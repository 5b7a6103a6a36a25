//! `efk` - a configuration-driven laboratory for the delayed
//! fourth-order reaction-diffusion equation
//! `u_t + gamma u_xxxx - u_xx - u = f(u(t - tau_1), ...) + g(t, x)`
//! on the unit interval with hinged ends.
//!
//! Subcommands map one-to-one onto experiments: `check` runs the
//! structural-condition arithmetic, `find-periodic` iterates the periodic
//! map to its fixed point, `solve-ivp` integrates an initial-value
//! problem, `verify-stability` measures perturbation decay against the
//! certified envelope, and `selftest` exercises the built-in cross-check
//! suite. Exit codes: 0 success, 1 internal or self-test failure,
//! 2 certificate or bound failure, 3 convergence failure, 64 bad
//! configuration.

// Guards written as `!(x > 0.0)` deliberately reject NaN along with the
// out-of-range sign; the suggested `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod selftest;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use crate::commands::SolveFlags;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "efk",
    version,
    about = "Numerical laboratory for time-periodic solutions of a delayed fourth-order \
             reaction-diffusion equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the growth, gap, Lipschitz, and delay-weighted-gap
    /// conditions for a configuration.
    Check(RunArgs),
    /// Integrate the delayed initial-value problem forward.
    SolveIvp(SolveArgs),
    /// Iterate the periodic map to a fixed point.
    FindPeriodic(RunArgs),
    /// Perturb the periodic solution and measure the decay back to it.
    VerifyStability(RunArgs),
    /// Run the built-in cross-check suite at small sizes.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Configuration file (JSON). Repeat the flag to fan several runs out.
    #[arg(long = "config", value_name = "PATH", required = true)]
    configs: Vec<PathBuf>,
    /// Directory the artifacts are written into. With several configs
    /// each run gets a subdirectory named after its file stem.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads when several configs are given.
    #[arg(long, value_name = "K", default_value_t = 1)]
    jobs: usize,
    /// Refuse to run anything the declared constants cannot certify.
    #[arg(long)]
    certificate: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Append an independent integral-equation residual column.
    #[arg(long)]
    residual_check: bool,
    /// Keep every n-th knot in the output files.
    #[arg(long, value_name = "N", default_value_t = 1)]
    stride: usize,
}

#[derive(Args)]
struct SelftestArgs {
    /// Inject a deliberate defect to confirm the checks catch it.
    #[arg(long, value_enum, default_value_t = selftest::Fault::None)]
    fault: selftest::Fault,
}

/// What to do with one parsed configuration.
enum Invocation {
    Check,
    Solve(SolveFlags),
    Periodic,
    Stability,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are normal exits; anything else is a usage
            // problem, which the exit-code contract files under 64.
            let _ = err.print();
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Selftest(args) => selftest::run(args.fault),
        Command::Check(args) => fan_out(&args, &Invocation::Check),
        Command::FindPeriodic(args) => fan_out(&args, &Invocation::Periodic),
        Command::VerifyStability(args) => fan_out(&args, &Invocation::Stability),
        Command::SolveIvp(args) => {
            let flags = SolveFlags {
                residual_check: args.residual_check,
                stride: args.stride,
            };
            fan_out(&args.run, &Invocation::Solve(flags))
        }
    };
    std::process::exit(code);
}

/// Runs every configuration, in parallel when asked, and reports the
/// worst exit code.
fn fan_out(args: &RunArgs, invocation: &Invocation) -> i32 {
    let multiple = args.configs.len() > 1;
    let mut seen = HashSet::new();
    let tasks: Vec<(PathBuf, PathBuf)> = args
        .configs
        .iter()
        .map(|config| {
            let out_dir = if multiple {
                let stem = config
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "run".to_string());
                let mut name = stem.clone();
                let mut k = 1;
                while !seen.insert(name.clone()) {
                    k += 1;
                    name = format!("{stem}-{k}");
                }
                args.out.join(name)
            } else {
                args.out.clone()
            };
            (config.clone(), out_dir)
        })
        .collect();

    let jobs = args.jobs.max(1).min(tasks.len().max(1));
    if jobs == 1 {
        return tasks
            .iter()
            .map(|(config, out_dir)| run_one(config, out_dir, args.certificate, invocation))
            .max()
            .unwrap_or(64);
    }

    let queue = Mutex::new(tasks.iter());
    let worst = Mutex::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let task = queue.lock().expect("queue lock").next();
                let Some((config, out_dir)) = task else {
                    break;
                };
                let code = run_one(config, out_dir, args.certificate, invocation);
                let mut worst = worst.lock().expect("result lock");
                *worst = (*worst).max(code);
            });
        }
    });
    worst.into_inner().expect("result lock")
}

fn run_one(config_path: &Path, out_dir: &Path, certificate: bool, invocation: &Invocation) -> i32 {
    let raw = match std::fs::read(config_path) {
        Ok(raw) => raw,
        Err(err) => {
            eprintln!("cannot read {}: {err}", config_path.display());
            return 64;
        }
    };
    let cfg: RunConfig = match serde_json::from_slice(&raw) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!(
                "{}:{}:{}: {err}",
                config_path.display(),
                err.line(),
                err.column()
            );
            return 64;
        }
    };
    if let Err(err) = std::fs::create_dir_all(out_dir) {
        eprintln!("cannot create {}: {err}", out_dir.display());
        return 1;
    }
    match invocation {
        Invocation::Check => commands::check(&cfg, &raw, out_dir, certificate),
        Invocation::Periodic => commands::find_periodic_cmd(&cfg, &raw, out_dir, certificate),
        Invocation::Stability => commands::verify_stability(&cfg, &raw, out_dir, certificate),
        Invocation::Solve(flags) => {
            commands::solve_ivp_cmd(&cfg, &raw, out_dir, certificate, flags)
        }
    }
}
