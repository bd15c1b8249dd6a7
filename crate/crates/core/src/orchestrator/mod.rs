//! Campaign lifecycle: search, final training, ablation, persistence and
//! reporting.

pub mod ablation;
pub mod campaign;
pub mod config;
pub mod events;
pub mod final_train;
pub mod report;

use thiserror::Error;

use crate::ensemble::EnsembleError;
use crate::executor::ExecError;

pub use ablation::{parse_steps, run_ablation, AblationRow, AblationStep};
pub use campaign::{
    run_campaign, run_random_search, run_to_completion, trial_seed, CampaignOutcome, CampaignSettings, Driver,
    RandomSearchOutcome,
};
pub use config::{CampaignConfig, ExecutorKind, ExecutorSection, PathsSection};
pub use events::{parse_log, read_log, replay, BestTrial, CampaignEvent, EventLog, EventPayload, ReplayedCampaign};
pub use final_train::{final_train, member_seed, FinalOutcome, FinalSettings, MemberRun};
pub use report::{render_report, summarize, CampaignSummary, DurationStats, RungSummary};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("config: {0}")]
    Config(String),
    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("replay failed at event {index}: {message}")]
    Replay { index: u64, message: String },
    #[error("every trial failed")]
    AllFailed,
    #[error("unknown ablation step: {0}")]
    UnknownStep(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
