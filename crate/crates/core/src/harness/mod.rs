//! Experiment orchestration: configuration, the round protocol, multi-seed
//! execution, CSV output and the acceptance checks.

pub mod checks;
pub mod config;
pub mod opponents;
pub mod output;
pub mod run;
pub mod suite;

pub use config::{CheckKind, ExperimentConfig, GameConfig, OpponentKind, OpponentSpec, PlayerConfig};
pub use opponents::adversarial_opponent_step;
pub use output::{Aggregate, RUN_HEADER};
pub use run::{run_one, Experiment, RunTrace};
pub use suite::{execute_seeds, run_suite, SuiteReport};
