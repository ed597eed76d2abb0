//! Seed-deterministic simulation of optimistic gradient learners in
//! continuous games with noisy first-order feedback.
//!
//! The crate is organised bottom-up: [`types`] holds vectors, weights and
//! random streams; [`games`] the payoff oracles; [`noise`] the feedback
//! models; [`schedules`] the learning-rate sequences; [`learners`] the update
//! rules; [`metrics`] regret, gradient energy and the energy identities; and
//! [`harness`] runs experiments and the acceptance checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod games;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod noise;
pub mod schedules;
pub mod types;

pub use error::{Error, Result};
pub use games::GameSpec;
pub use learners::{Algorithm, LearnerState};
pub use noise::NoiseSpec;
pub use schedules::{ScheduleKind, ScheduleSpec};
pub use types::{JointAction, PlayerVector, RngStream, WeightVector};
