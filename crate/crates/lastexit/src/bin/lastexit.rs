//! Experiment runner. Each subcommand verifies one slice of the library
//! against exact oracles or Monte Carlo, writes a JSON report plus CSV data
//! files, and exits 0 only when every acceptance check passes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lastexit::cli_experiments::{self, ConfigFile, Experiment, Overrides, Settings};

#[derive(Parser)]
#[command(
    name = "lastexit",
    version,
    about = "Conditioned Markov processes: exact and statistical verification experiments",
    after_help = "Exit codes: 0 all checks passed, 1 acceptance failure, 2 usage/config error.\n\
                  Config file: flat TOML with any of alpha, beta, mu, gamma, logistic_mu,\n\
                  logistic_kappa, logistic_sigma, logistic_a, lambda_ladder, n_paths, dt,\n\
                  epsilon, escape_delta, master_seed, experiment_id."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML config file; CLI flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for the deterministic path substreams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for the report and CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override every ensemble size with this path count.
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Reduced-size smoke mode (ensembles shrink 20x).
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact identities for the asymmetric walk (acceptance criteria 1-2).
    CtmcVerify,
    /// Gillespie ensembles for the walk: law of N, sampler exactness, and
    /// the two-ensemble comparison (criterion 3).
    CtmcMc,
    /// Bang-bang resolvent structure and the excursion-rate integral
    /// (criteria 4-5).
    BmResolvent,
    /// Brownian statistical suites for the two limit theorems
    /// (criteria 6-7).
    BmThm12,
    /// Hit probabilities of the transient OU process and the not-an-OU
    /// check (criterion 8).
    OuH,
    /// Both conditioned-drift conventions for the logistic SDE, with a
    /// Monte Carlo check of the hitting function.
    LogisticDrift,
    /// Finite-difference generator validation (criterion 10).
    FdValidate,
    /// Local-time conditioning suite (criterion 9).
    LocaltimeCond,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::CtmcVerify => Experiment::CtmcVerify,
            Command::CtmcMc => Experiment::CtmcMc,
            Command::BmResolvent => Experiment::BmResolvent,
            Command::BmThm12 => Experiment::BmThm12,
            Command::OuH => Experiment::OuH,
            Command::LogisticDrift => Experiment::LogisticDrift,
            Command::FdValidate => Experiment::FdValidate,
            Command::LocaltimeCond => Experiment::LocaltimeCond,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exp = cli.command.experiment();

    let file = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ConfigFile::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        n_paths: cli.paths,
        quick: cli.quick,
    };
    let settings = match Settings::resolve(exp, &file, &overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match cli_experiments::run(exp, &settings, &cli.out) {
        Ok(report) => {
            for line in report.lines() {
                println!("{line}");
            }
            println!(
                "report: {}",
                cli.out
                    .join(format!("{}_report.json", exp.name()))
                    .display()
            );
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(lastexit::Error::Config(e)) => {
            eprintln!("error: config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
