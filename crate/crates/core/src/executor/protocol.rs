//! Line-delimited JSON spoken between the orchestrator and external workers.
//!
//! Orchestrator to worker:
//!
//! ```text
//! {"type":"start","trial_id":3,"config":{...},"max_epochs":200,"seed":17}
//! {"type":"decision","trial_id":3,"action":"continue"}
//! {"type":"score","request_id":0,"paths":["view-00.png", ...]}
//! ```
//!
//! Worker to orchestrator:
//!
//! ```text
//! {"type":"result","trial_id":3,"epoch":1,"metric":0.41}
//! {"type":"done","trial_id":3,"final_metric":0.58}
//! {"type":"error","trial_id":3,"message":"CUDA out of memory"}
//! {"type":"logits","request_id":0,"logits":[[...], ...]}
//! ```
//!
//! `start` may carry `"phase":"final"`; workers that ignore it still work.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asha::TrialId;
use crate::hyperspace::TrialConfig;

use super::Phase;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("message must be a single line")]
    Multiline,
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error("trial {trial}: epoch {epoch} does not follow epoch {previous}")]
    EpochOrder { trial: TrialId, epoch: u32, previous: u32 },
    #[error("non-finite number in message")]
    NonFinite,
    #[error("stream closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ToWorker {
    Start {
        trial_id: TrialId,
        config: TrialConfig,
        max_epochs: u32,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Phase>,
    },
    Decision {
        trial_id: TrialId,
        action: Action,
    },
    Score {
        request_id: u64,
        paths: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FromWorker {
    Result { trial_id: TrialId, epoch: u32, metric: f64 },
    Done { trial_id: TrialId, final_metric: f64 },
    Error { trial_id: TrialId, message: String },
    Logits { request_id: u64, logits: Vec<Vec<f64>> },
}

impl ToWorker {
    fn finite(&self) -> bool {
        match self {
            ToWorker::Start { config, .. } => config.learning_rate.is_finite() && config.weight_decay.is_finite(),
            _ => true,
        }
    }
}

impl FromWorker {
    fn finite(&self) -> bool {
        match self {
            FromWorker::Result { metric, .. } => metric.is_finite(),
            FromWorker::Done { final_metric, .. } => final_metric.is_finite(),
            FromWorker::Error { .. } => true,
            FromWorker::Logits { logits, .. } => logits.iter().flatten().all(|v| v.is_finite()),
        }
    }
}

pub trait Message: Serialize + for<'de> Deserialize<'de> {
    fn is_finite(&self) -> bool;
}

impl Message for ToWorker {
    fn is_finite(&self) -> bool {
        self.finite()
    }
}

impl Message for FromWorker {
    fn is_finite(&self) -> bool {
        self.finite()
    }
}

/// One JSON object, no newline.
pub fn encode<M: Message>(msg: &M) -> Result<String, ProtocolError> {
    if !msg.is_finite() {
        return Err(ProtocolError::NonFinite);
    }
    serde_json::to_string(msg).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// Parses one line. A single trailing `\n` or `\r\n` is accepted; anything
/// else after the object is an error.
pub fn decode_line<M: Message>(line: &str) -> Result<M, ProtocolError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    if body.contains('\n') {
        return Err(ProtocolError::Multiline);
    }
    let msg: M = serde_json::from_str(body).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if !msg.is_finite() {
        return Err(ProtocolError::NonFinite);
    }
    Ok(msg)
}

pub fn write_message<M: Message, W: Write>(writer: &mut W, msg: &M) -> Result<(), ProtocolError> {
    let mut line = encode(msg)?;
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    writer.flush()?;
    Ok(())
}

/// `Ok(None)` at end of stream. Blank lines are skipped.
pub fn read_message<M: Message, R: BufRead>(reader: &mut R) -> Result<Option<M>, ProtocolError> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        if !line.trim().is_empty() {
            return decode_line(&line).map(Some);
        }
    }
}
