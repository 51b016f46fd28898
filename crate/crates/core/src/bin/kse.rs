use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kse::harness::{self, Experiment, Fault, RunConfig};
use kse::{KseError, RunStatus};

#[derive(Parser)]
#[command(name = "kse", version, about = "Pseudo-spectral Kuramoto–Sivashinsky simulator and regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config (default: a plain run).
    Run { config: PathBuf },
    /// Run the built-in invariant checks.
    Validate {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Track the divergence-free part of a vector run.
    Drift { config: PathBuf },
    /// Compare a λ = 0 run with its dilation by an integer factor.
    Scaling {
        #[arg(long, default_value_t = 2)]
        beta: u32,
        config: PathBuf,
    },
    /// Produce every CSV and checkpoint the figure scripts consume.
    Figures { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    DealiasMask,
}

fn load(path: &PathBuf, experiment: Option<Experiment>) -> Result<RunConfig, KseError> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(e) = experiment {
        cfg.experiment = e;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run_experiment(path: &PathBuf, experiment: Option<Experiment>, beta: Option<u32>) -> ExitCode {
    let result = load(path, experiment).and_then(|mut cfg| {
        if let Some(b) = beta {
            cfg.beta = b;
            cfg.validate()?;
        }
        harness::execute(&cfg)
    });
    match &result {
        Ok(RunStatus::Completed) => {}
        Ok(RunStatus::Diverged { step, time }) => eprintln!("kse: diverged at step {step} (t = {time})"),
        Err(e) => eprintln!("kse: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => run_experiment(&config, None, None),
        Command::Drift { config } => run_experiment(&config, Some(Experiment::Drift), None),
        Command::Figures { config } => run_experiment(&config, Some(Experiment::Figures), None),
        Command::Scaling { beta, config } => run_experiment(&config, Some(Experiment::Scaling), Some(beta)),
        Command::Validate { inject_fault } => {
            let fault = inject_fault.map(|FaultArg::DealiasMask| Fault::DealiasMask);
            let results = harness::validate(fault);
            let mut failed = 0;
            for r in &results {
                println!("{} {:<26} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                if !r.passed {
                    failed += 1;
                }
            }
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                for r in results.iter().filter(|r| !r.passed) {
                    eprintln!("kse: check failed: {}", r.name);
                }
                ExitCode::from(1)
            }
        }
    }
}
