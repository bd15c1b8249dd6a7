//! Hyperparameter search and experiment orchestration for data-efficient
//! image classification.
//!
//! The pieces compose into one pipeline: sample configurations from a
//! [`hyperspace::SearchSpace`], schedule them with [`asha`], run them through a
//! [`executor::TrialExecutor`], retrain the winner several times and combine
//! the members with [`ensemble`] and [`tta`]. [`orchestrator`] wires it all
//! together and records every step in a replayable event log.

pub mod asha;
pub mod augment;
pub mod ensemble;
pub mod executor;
pub mod hyperspace;
pub mod optim;
pub mod orchestrator;
pub mod seed;
pub mod tta;
