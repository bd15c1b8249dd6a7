//! Trial execution.
//!
//! An executor turns a [`StartTrial`] into a [`TrialSession`], a lockstep
//! conversation: the session yields one [`SessionEvent`] at a time, and after
//! every epoch result the caller answers with an [`Action`]. After `Stop`, or
//! after the final epoch, the session yields `Done` and ends.
//!
//! Three executors exist: [`SyntheticExecutor`] (closed-form learning curves),
//! [`LogisticExecutor`] (real minibatch SGD on Gaussian blobs) and
//! [`ExternalExecutor`] (any process speaking the JSON-lines protocol in
//! [`protocol`]).

mod external;
mod logistic;
pub mod protocol;
mod synthetic;
pub mod worker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asha::TrialId;
use crate::ensemble::ModelPredictions;
use crate::hyperspace::TrialConfig;

pub use external::{ExternalExecutor, Transport};
pub use logistic::{
    logistic_loss_and_grad, BlobData, BlobSpec, FeatureMap, LogisticExecutor, LogisticModel, LogisticTrial, Sample,
    TrainSplit,
};
pub use protocol::{Action, FromWorker, ProtocolError, ToWorker};
pub use synthetic::{SyntheticExecutor, SyntheticObjective};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("trial {0}: no message within the epoch timeout")]
    Timeout(TrialId),
    #[error("trial {0}: training diverged")]
    Diverged(TrialId),
    #[error("trial {trial}: worker reported: {message}")]
    Worker { trial: TrialId, message: String },
    #[error("trial {0}: session already finished")]
    Finished(TrialId),
    #[error("executor: {0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training stage of a trial; final runs train on the combined split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Tune,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartTrial {
    pub trial_id: TrialId,
    pub config: TrialConfig,
    pub max_epochs: u32,
    pub seed: u64,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochResult {
    pub trial_id: TrialId,
    /// 1-based.
    pub epoch: u32,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionEvent {
    Result(EpochResult),
    Done { final_metric: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandleStatus {
    Pending,
    Running,
    Stopped,
    Completed,
    Failed,
}

/// Lifecycle record of one trial. Status only moves forward.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialHandle {
    pub trial_id: TrialId,
    pub config: TrialConfig,
    pub max_epochs: u32,
    status: HandleStatus,
}

impl TrialHandle {
    pub fn new(trial_id: TrialId, config: TrialConfig, max_epochs: u32) -> Self {
        TrialHandle { trial_id, config, max_epochs, status: HandleStatus::Pending }
    }

    pub fn status(&self) -> HandleStatus {
        self.status
    }

    /// Moves to `next` if that is a forward transition; returns whether it did.
    pub fn advance(&mut self, next: HandleStatus) -> bool {
        use HandleStatus::*;
        let ok = matches!(
            (self.status, next),
            (Pending, Running) | (Pending, Failed) | (Running, Stopped) | (Running, Completed) | (Running, Failed)
        );
        if ok {
            self.status = next;
        }
        ok
    }
}

pub trait TrialSession: Send {
    fn next_event(&mut self) -> Result<SessionEvent, ExecError>;

    fn send_decision(&mut self, action: Action) -> Result<(), ExecError>;

    /// Held-out predictions of the trained model, if the executor produces them.
    fn predictions(&mut self) -> Option<ModelPredictions> {
        None
    }
}

pub trait TrialExecutor: Send + Sync {
    fn start(&self, start: &StartTrial) -> Result<Box<dyn TrialSession>, ExecError>;
}
