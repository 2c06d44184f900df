//! `hybridchain` command-line harness.
//!
//! Exit codes: 0 on success, 1 for configuration or input errors, 2 when a
//! run fails at runtime.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hybridchain::metrics::read_csv;
use hybridchain::sim::{analyze, run_simulation, topology_report, HarnessConfig, SchedulerMode};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "hybridchain", version, about = "Run, analyze and size broker-mediated PBFT deployments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one deployment and write its CSV, logs and report into a directory.
    Simulate {
        /// `key = value` configuration file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Seeded)]
        mode: Mode,
    },
    /// Summarize one or more metrics CSVs, comparing runs in argument order.
    Analyze {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Print connection counts for a brokered and a full-mesh network.
    Topology {
        #[arg(long)]
        n_max: u64,
        #[arg(long, default_value_t = 3)]
        brokers: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Real,
    Seeded,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: message.into() }
    }
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn simulate(config: PathBuf, out: PathBuf, mode: Mode) -> Result<(), Failure> {
    let cfg = HarnessConfig::load(&config).map_err(|e| Failure::config(format!("invalid config:\n{e}")))?;
    let mode = match mode {
        Mode::Real => SchedulerMode::Real,
        Mode::Seeded => SchedulerMode::Seeded,
    };
    let run = run_simulation(&cfg, mode).map_err(|e| Failure::runtime(e.to_string()))?;
    run.write_to(&out)
        .map_err(|e| Failure::runtime(format!("writing {}: {e}", out.display())))?;
    println!("{} rounds committed; artifacts in {}", run.rows.len(), out.display());
    if run.halted() {
        return Err(Failure::runtime("master halted the run after repeated aborts"));
    }
    let divergence = run.chain_divergence();
    if !divergence.is_empty() {
        return Err(Failure::runtime(format!("chains diverged: {}", divergence.join("; "))));
    }
    Ok(())
}

fn analyze_csvs(paths: Vec<PathBuf>) -> Result<(), Failure> {
    let mut runs = Vec::new();
    for p in paths {
        let rows = read_csv(&p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
        runs.push((p.display().to_string(), rows));
    }
    let analysis = analyze(&runs).map_err(|e| Failure::config(e.to_string()))?;
    emit(&analysis.to_string());
    Ok(())
}

fn topology(n_max: u64, brokers: u64) -> Result<(), Failure> {
    if n_max == 0 {
        return Err(Failure::config("--n-max must be at least 1"));
    }
    if brokers == 0 {
        return Err(Failure::config("--brokers must be at least 1"));
    }
    emit(&topology_report(n_max, brokers));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { config, out, mode } => simulate(config, out, mode),
        Command::Analyze { csv } => analyze_csvs(csv),
        Command::Topology { n_max, brokers } => topology(n_max, brokers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
