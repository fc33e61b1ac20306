//! `mixcascade`: simulate mixed-asymptotic cascades, estimate their scaling
//! exponents and compare them with theory.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 resource refusal.

// `!(x < y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{ConfigError, Experiment, Overrides, Profile};

#[derive(Parser, Debug)]
#[command(name = "mixcascade", version, about = "Mixed-asymptotic multifractal cascade experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment file; every key is optional except the seed.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides run.master_seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (0 uses every core); outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory; overrides run.out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Preset scale, applied before the config file.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,

    /// Leave the timestamp out of plots so reruns are byte-identical.
    #[arg(long, global = true)]
    reproducible: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build mixed measures and write binary dumps.
    Simulate,
    /// Estimate tau_chi(p) over an ensemble and plot it against theory.
    Fit,
    /// Tabulate critical exponents, tau, D(h) and the Besov frontier.
    Spectrum,
    /// Box-counting histograms per level and fitted dimensions.
    Histogram,
    /// Variance rate of the rescaled partition function.
    Clt,
    /// Fit and theory side by side, with deviations.
    Report,
}

/// Prints a line to stdout, ignoring a closed pipe.
pub fn say(line: impl std::fmt::Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn run(cli: &Cli) -> Result<()> {
    let over = Overrides { profile: cli.profile, seed: cli.seed, workers: cli.workers, out: cli.out.clone() };
    let exp = Experiment::load(cli.config.as_deref(), &over)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(exp.workers).build()?;
    let mut ctx = Context::new(exp, cli.reproducible);
    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&mut ctx),
        Command::Fit => commands::fit(&mut ctx),
        Command::Spectrum => commands::spectrum(&mut ctx),
        Command::Histogram => commands::histogram(&mut ctx),
        Command::Clt => commands::clt(&mut ctx),
        Command::Report => commands::report(&mut ctx),
    })?;
    for path in &ctx.written {
        say(format_args!("wrote {}", path.display()));
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    let resource = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<mixcascade::Error>(), Some(mixcascade::Error::ResourceLimit { .. })));
    if resource {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
