//! `abc-bench` command-line front end.

mod commands;
mod inputs;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Insertion/deletion curve benchmarks for feature attributions.
///
/// Exit codes: 0 success, 1 computation or check failure, 2 usage or
/// configuration error.
#[derive(Debug, Parser)]
#[command(name = "abc-bench", version, propagate_version = true)]
struct Cli {
    /// Worker threads; 1 runs everything serially. Defaults to the available parallelism.
    #[arg(long, global = true, env = "ABC_BENCH_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the anchored decomposition (dividends) of one pair as CSV.
    Decompose(commands::DecomposeArgs),
    /// Print insertion/deletion trajectories and their areas for one pair.
    Curve(commands::CurveArgs),
    /// Print attribution scores for one pair.
    Attribute(commands::AttributeArgs),
    /// Run a full experiment from a config file.
    Experiment(commands::ExperimentArgs),
    /// Run remove-and-retrain from a config file.
    Roar(commands::RoarArgs),
    /// Check the exact identities against brute force at small n.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
struct SelfcheckArgs {
    /// Seed for the random models and points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = cli.threads.map(|t| t as usize);
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot set up {t} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Decompose(a) => commands::decompose(a),
        Command::Curve(a) => commands::curve(a),
        Command::Attribute(a) => commands::attribute(a),
        Command::Experiment(a) => commands::experiment(a, threads),
        Command::Roar(a) => commands::roar(a, threads),
        Command::Selfcheck(a) => return selfcheck(a.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn selfcheck(seed: u64) -> ExitCode {
    let outcomes = abc_bench::selfcheck::run_all(seed);
    let mut ok = true;
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
