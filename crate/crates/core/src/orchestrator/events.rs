use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::asha::{AshaConfig, AshaState, Decision, TrialId, TrialStatus};
use crate::hyperspace::{SearchSpace, TrialConfig};

use super::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestTrial {
    pub trial_id: TrialId,
    pub metric: f64,
    pub resource: u32,
}

/// Kind-specific content of a [`CampaignEvent`]. Serialized as
/// `"kind": "<snake_case>", "payload": {...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    CampaignStarted { seed: u64, parallelism: usize, asha: AshaConfig, search_space: SearchSpace },
    TrialSampled { trial_id: TrialId, config: TrialConfig, seed: u64 },
    TrialStarted { trial_id: TrialId },
    Result { trial_id: TrialId, epoch: u32, metric: f64 },
    Decision { trial_id: TrialId, resource: u32, decision: Decision },
    TrialDone { trial_id: TrialId, status: TrialStatus, epochs: u32, final_metric: f64 },
    TrialFailed { trial_id: TrialId, epochs: u32, reason: String },
    CampaignDone { best: Option<BestTrial> },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::CampaignStarted { .. } => "campaign_started",
            EventPayload::TrialSampled { .. } => "trial_sampled",
            EventPayload::TrialStarted { .. } => "trial_started",
            EventPayload::Result { .. } => "result",
            EventPayload::Decision { .. } => "decision",
            EventPayload::TrialDone { .. } => "trial_done",
            EventPayload::TrialFailed { .. } => "trial_failed",
            EventPayload::CampaignDone { .. } => "campaign_done",
        }
    }

    pub fn trial_id(&self) -> Option<TrialId> {
        match self {
            EventPayload::TrialSampled { trial_id, .. }
            | EventPayload::TrialStarted { trial_id }
            | EventPayload::Result { trial_id, .. }
            | EventPayload::Decision { trial_id, .. }
            | EventPayload::TrialDone { trial_id, .. }
            | EventPayload::TrialFailed { trial_id, .. } => Some(*trial_id),
            EventPayload::CampaignStarted { .. } | EventPayload::CampaignDone { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignEvent {
    pub index: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Append-only campaign log, mirrored in memory and optionally on disk.
pub struct EventLog {
    events: Vec<CampaignEvent>,
    sink: Option<BufWriter<File>>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog { events: Vec::new(), sink: None }
    }

    /// Creates (or truncates) the file at `path`, creating parent directories.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(EventLog { events: Vec::new(), sink: Some(BufWriter::new(file)) })
    }

    pub fn append(&mut self, payload: EventPayload) -> Result<&CampaignEvent, OrchestratorError> {
        let event = CampaignEvent { index: self.events.len() as u64, timestamp: now_ms(), payload };
        if let Some(sink) = &mut self.sink {
            serde_json::to_writer(&mut *sink, &event).map_err(|e| OrchestratorError::Log { line: 0, message: e.to_string() })?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn events(&self) -> &[CampaignEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<CampaignEvent> {
        self.events
    }
}

/// Parses a JSONL log. Errors carry the 1-based line number; indices must run
/// contiguously from 0.
pub fn parse_log(reader: impl BufRead) -> Result<Vec<CampaignEvent>, OrchestratorError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: CampaignEvent = serde_json::from_str(&line)
            .map_err(|e| OrchestratorError::Log { line: line_no, message: e.to_string() })?;
        if event.index != events.len() as u64 {
            return Err(OrchestratorError::Log {
                line: line_no,
                message: format!("expected index {}, found {}", events.len(), event.index),
            });
        }
        events.push(event);
    }
    Ok(events)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<CampaignEvent>, OrchestratorError> {
    parse_log(BufReader::new(File::open(path)?))
}

/// Scheduler state and trial bookkeeping rebuilt from a log.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayedCampaign {
    pub seed: u64,
    pub state: AshaState,
    pub configs: BTreeMap<TrialId, TrialConfig>,
    pub best: Option<BestTrial>,
    pub finished: bool,
}

impl ReplayedCampaign {
    pub fn best_config(&self) -> Option<TrialConfig> {
        self.best.and_then(|b| self.configs.get(&b.trial_id).copied())
    }
}

fn replay_error(event: &CampaignEvent, message: impl Into<String>) -> OrchestratorError {
    OrchestratorError::Replay { index: event.index, message: message.into() }
}

/// Feeds every result back through the scheduler and checks each logged
/// decision against the recomputed one.
pub fn replay(events: &[CampaignEvent]) -> Result<ReplayedCampaign, OrchestratorError> {
    let first = events.first().ok_or(OrchestratorError::Replay { index: 0, message: "empty log".into() })?;
    let EventPayload::CampaignStarted { seed, asha, .. } = &first.payload else {
        return Err(replay_error(first, "log must start with campaign_started"));
    };
    let mut state = AshaState::new(*asha).map_err(|e| replay_error(first, e.to_string()))?;
    let mut configs = BTreeMap::new();
    let mut pending: Option<(TrialId, u32, Decision)> = None;
    let mut best = None;
    let mut finished = false;
    for event in &events[1..] {
        if let Some((trial, resource, decision)) = pending.take() {
            match &event.payload {
                EventPayload::Decision { trial_id, resource: r, decision: d }
                    if *trial_id == trial && *r == resource && *d == decision => continue,
                _ => return Err(replay_error(event, format!("expected decision {decision:?} for trial {trial}"))),
            }
        }
        match &event.payload {
            EventPayload::CampaignStarted { .. } => return Err(replay_error(event, "second campaign_started")),
            EventPayload::TrialSampled { trial_id, config, .. } => {
                state.register(*trial_id).map_err(|e| replay_error(event, e.to_string()))?;
                configs.insert(*trial_id, *config);
            }
            EventPayload::TrialStarted { .. } | EventPayload::TrialDone { .. } => {}
            EventPayload::Result { trial_id, epoch, metric } => {
                let d = state.record_and_decide(*trial_id, *epoch, *metric).map_err(|e| replay_error(event, e.to_string()))?;
                pending = Some((*trial_id, *epoch, d));
            }
            EventPayload::Decision { .. } => return Err(replay_error(event, "decision without a result")),
            EventPayload::TrialFailed { trial_id, .. } => {
                if state.status(*trial_id) == Some(TrialStatus::Running) {
                    state.mark_failed(*trial_id).map_err(|e| replay_error(event, e.to_string()))?;
                }
            }
            EventPayload::CampaignDone { best: b } => {
                best = *b;
                finished = true;
            }
        }
    }
    if let Some((trial, ..)) = pending {
        return Err(OrchestratorError::Replay {
            index: events.len() as u64,
            message: format!("log ends before the decision for trial {trial}"),
        });
    }
    Ok(ReplayedCampaign { seed: *seed, state, configs, best, finished })
}
