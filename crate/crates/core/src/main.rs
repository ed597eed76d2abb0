use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gamelab::harness::checks::{context_from_config, criterion_id, run_check};
use gamelab::harness::output::{run_file_name, save_run_csv};
use gamelab::harness::suite::{canonical_seeds, run_suite, thread_count};
use gamelab::harness::{run_one, Experiment, ExperimentConfig};
use gamelab::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "gamelab",
    version,
    about = "Optimistic gradient learners in games with noisy feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a single run (the first configured seed) and write its CSV.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Execute every configured seed and write per-run CSVs plus aggregate.csv.
    Suite {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run an acceptance criterion (number 1-10 or its name); exits 0 iff it passes.
    Check {
        config: PathBuf,
        criterion: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Replace the configured horizon.
    #[arg(long)]
    horizon_override: Option<usize>,
    /// Replace the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = o.seed_override {
        cfg.seeds = vec![s];
    }
    if let Some(h) = o.horizon_override {
        cfg.horizon = h;
    }
    if let Some(out) = &o.output {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let exp = Experiment::from_config(&cfg)?;
            let seed = canonical_seeds(&cfg.seeds)[0];
            let trace = run_one(&exp, seed, 0)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join(run_file_name(0, seed));
            save_run_csv(&trace, &path)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Suite { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let exp = Experiment::from_config(&cfg)?;
            let (report, written) = run_suite(&exp, &cfg.seeds, &cfg.output_dir, thread_count()?)?;
            for p in &written {
                println!("{}", p.display());
            }
            for (seed, err) in &report.failures {
                eprintln!("seed {seed} failed: {err}");
            }
            eprintln!(
                "{} run(s) succeeded, {} failed",
                report.runs.len(),
                report.failure_count()
            );
            Ok(report.failures.is_empty())
        }
        Command::Check {
            config,
            criterion,
            overrides,
        } => {
            let id = criterion_id(&criterion)?;
            if overrides.horizon_override.is_some() {
                return Err(Error::Usage(
                    "acceptance criteria use fixed horizons; --horizon-override is not accepted".into(),
                ));
            }
            let cfg = load(&config, &overrides)?;
            let ctx = context_from_config(&cfg, thread_count()?);
            let outcome = run_check(id, &ctx)?;
            println!("{outcome}");
            Ok(outcome.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
