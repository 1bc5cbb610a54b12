use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use markcfg::{run, Experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "markcfg", version, about = "Verify identities on marked configuration spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the experiment names with the identity each one checks.
    ListExperiments,
}

fn execute(config: PathBuf, seed: Option<u64>, samples: Option<u64>, out: Option<PathBuf>) -> Result<bool, HarnessError> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = samples {
        cfg.params.n_samples = n;
    }
    let report = run(&cfg)?;
    for r in &report.records {
        eprintln!(
            "{} {}: estimate {:.6e}, target {:.6e}, bound {:.3e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.estimate,
            r.target,
            r.bound
        );
    }
    let json = report.to_json();
    match out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<24} {}", e.name(), e.identity());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, samples, out } => match execute(config, seed, samples, out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("markcfg: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
