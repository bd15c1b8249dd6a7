//! Asynchronous successive halving, stopping variant.
//!
//! Trials run until the scheduler tells them to stop. Each report at a rung
//! level is ranked against everything already recorded at that rung, and the
//! trial survives iff it sits in the top `ceil(n / η)`. Decisions use only
//! what is known at report time and are never revisited.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrialId(pub u32);

impl fmt::Display for TrialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    #[default]
    Maximize,
    Minimize,
}

impl MetricMode {
    /// Strictly better.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            MetricMode::Maximize => a > b,
            MetricMode::Minimize => a < b,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AshaError {
    #[error("invalid scheduler config: {0}")]
    Config(&'static str),
    #[error("unknown trial {0}")]
    UnknownTrial(TrialId),
    #[error("trial {0} registered twice")]
    DuplicateTrial(TrialId),
    #[error("trial {0} is not running")]
    NotRunning(TrialId),
    #[error("trial {trial}: resource {resource} does not exceed previous report {previous}")]
    NonMonotonic { trial: TrialId, resource: u32, previous: u32 },
    #[error("trial {trial}: resource {resource} exceeds max resource {max}")]
    BeyondMax { trial: TrialId, resource: u32, max: u32 },
    #[error("trial {0}: metric is not finite")]
    NonFinite(TrialId),
    #[error("trial {0} appears more than once in a batch")]
    RepeatedInBatch(TrialId),
    #[error("no metrics recorded")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AshaConfig {
    /// First rung; no trial is stopped before it.
    pub grace_period: u32,
    /// η: roughly `1/η` of the trials reaching a rung survive it.
    #[serde(default = "default_eta")]
    pub reduction_factor: u32,
    pub max_resource: u32,
    pub num_trials: u32,
    #[serde(default)]
    pub metric_mode: MetricMode,
}

fn default_eta() -> u32 {
    4
}

impl Default for AshaConfig {
    fn default() -> Self {
        AshaConfig {
            grace_period: 10,
            reduction_factor: 4,
            max_resource: 200,
            num_trials: 200,
            metric_mode: MetricMode::Maximize,
        }
    }
}

impl AshaConfig {
    pub fn validate(&self) -> Result<(), AshaError> {
        if self.grace_period < 1 || self.grace_period > self.max_resource {
            return Err(AshaError::Config("need 1 <= grace_period <= max_resource"));
        }
        if self.reduction_factor < 2 {
            return Err(AshaError::Config("reduction factor must be at least 2"));
        }
        if self.num_trials < 1 {
            return Err(AshaError::Config("num_trials must be at least 1"));
        }
        Ok(())
    }

    /// `grace·η^k` for every `k ≥ 0` with `grace·η^k ≤ max_resource`, ascending.
    pub fn rung_levels(&self) -> Vec<u32> {
        let mut levels = Vec::new();
        let mut level = self.grace_period as u64;
        while level <= self.max_resource as u64 {
            levels.push(level as u32);
            level *= self.reduction_factor as u64;
        }
        levels
    }

    pub fn keep_count(&self, recorded: usize) -> usize {
        recorded.div_ceil(self.reduction_factor as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Continue,
    Stop,
    /// The trial reached `max_resource`.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Running,
    Stopped,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungEntry {
    pub trial_id: TrialId,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub event_index: u64,
    pub trial_id: TrialId,
    pub resource: u32,
    pub decision: Decision,
}

/// A single report fed to the scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub trial_id: TrialId,
    pub resource: u32,
    pub metric: f64,
}

impl Report {
    pub fn new(trial_id: TrialId, resource: u32, metric: f64) -> Self {
        Report { trial_id, resource, metric }
    }
}

/// Rung ledger plus per-trial status and the append-only decision log.
#[derive(Debug, Clone, PartialEq)]
pub struct AshaState {
    config: AshaConfig,
    rungs: BTreeMap<u32, Vec<RungEntry>>,
    trial_status: BTreeMap<TrialId, TrialStatus>,
    last_resource: BTreeMap<TrialId, u32>,
    decision_log: Vec<DecisionRecord>,
}

impl AshaState {
    pub fn new(config: AshaConfig) -> Result<Self, AshaError> {
        config.validate()?;
        let rungs = config.rung_levels().into_iter().map(|r| (r, Vec::new())).collect();
        Ok(AshaState {
            config,
            rungs,
            trial_status: BTreeMap::new(),
            last_resource: BTreeMap::new(),
            decision_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &AshaConfig {
        &self.config
    }

    pub fn rungs(&self) -> &BTreeMap<u32, Vec<RungEntry>> {
        &self.rungs
    }

    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.decision_log
    }

    pub fn status(&self, trial: TrialId) -> Option<TrialStatus> {
        self.trial_status.get(&trial).copied()
    }

    pub fn trial_status(&self) -> &BTreeMap<TrialId, TrialStatus> {
        &self.trial_status
    }

    pub fn register(&mut self, trial: TrialId) -> Result<(), AshaError> {
        if self.trial_status.contains_key(&trial) {
            return Err(AshaError::DuplicateTrial(trial));
        }
        self.trial_status.insert(trial, TrialStatus::Running);
        Ok(())
    }

    /// Marks a running trial as failed. Its rung records stay in place.
    pub fn mark_failed(&mut self, trial: TrialId) -> Result<(), AshaError> {
        match self.trial_status.get_mut(&trial) {
            None => Err(AshaError::UnknownTrial(trial)),
            Some(s) if *s != TrialStatus::Running => Err(AshaError::NotRunning(trial)),
            Some(s) => {
                *s = TrialStatus::Failed;
                Ok(())
            }
        }
    }

    /// Records one result and returns the scheduler's decision for it.
    pub fn record_and_decide(
        &mut self,
        trial: TrialId,
        resource: u32,
        metric: f64,
    ) -> Result<Decision, AshaError> {
        Ok(self.record_batch_and_decide(&[Report::new(trial, resource, metric)])?[0])
    }

    /// Records reports that arrive together and decides each of them.
    ///
    /// All reports landing on the same rung are inserted before any of them is
    /// ranked, so a batch holding a whole synchronous rung reduces to plain
    /// successive halving. A batch of one is exactly [`record_and_decide`].
    /// Within a batch, slice order is arrival order. The batch is validated as
    /// a whole; on error nothing is recorded.
    ///
    /// [`record_and_decide`]: AshaState::record_and_decide
    pub fn record_batch_and_decide(&mut self, reports: &[Report]) -> Result<Vec<Decision>, AshaError> {
        let mut seen: BTreeMap<TrialId, u32> = BTreeMap::new();
        for r in reports {
            match self.trial_status.get(&r.trial_id) {
                None => return Err(AshaError::UnknownTrial(r.trial_id)),
                Some(TrialStatus::Running) => {}
                Some(_) => return Err(AshaError::NotRunning(r.trial_id)),
            }
            if !r.metric.is_finite() {
                return Err(AshaError::NonFinite(r.trial_id));
            }
            if r.resource > self.config.max_resource {
                return Err(AshaError::BeyondMax {
                    trial: r.trial_id,
                    resource: r.resource,
                    max: self.config.max_resource,
                });
            }
            if seen.insert(r.trial_id, r.resource).is_some() {
                return Err(AshaError::RepeatedInBatch(r.trial_id));
            }
            let previous = self.last_resource.get(&r.trial_id).copied().unwrap_or(0);
            if r.resource <= previous {
                return Err(AshaError::NonMonotonic { trial: r.trial_id, resource: r.resource, previous });
            }
        }
        let mut positions = Vec::with_capacity(reports.len());
        for r in reports {
            positions.push(self.rungs.get_mut(&r.resource).map(|entries| {
                entries.push(RungEntry { trial_id: r.trial_id, metric: r.metric });
                entries.len() - 1
            }));
        }

        let mode = self.config.metric_mode;
        let mut decisions = Vec::with_capacity(reports.len());
        for (r, pos) in reports.iter().zip(positions) {
            let survives = match pos {
                None => true,
                Some(pos) => {
                    let entries = &self.rungs[&r.resource];
                    let ahead = entries
                        .iter()
                        .enumerate()
                        .filter(|(i, e)| {
                            *i != pos && (mode.better(e.metric, r.metric) || (e.metric == r.metric && *i < pos))
                        })
                        .count();
                    ahead < self.config.keep_count(entries.len())
                }
            };
            let decision = match (survives, r.resource == self.config.max_resource) {
                (false, _) => Decision::Stop,
                (true, true) => Decision::Complete,
                (true, false) => Decision::Continue,
            };
            self.last_resource.insert(r.trial_id, r.resource);
            match decision {
                Decision::Stop => {
                    self.trial_status.insert(r.trial_id, TrialStatus::Stopped);
                }
                Decision::Complete => {
                    self.trial_status.insert(r.trial_id, TrialStatus::Completed);
                }
                Decision::Continue => {}
            }
            self.decision_log.push(DecisionRecord {
                event_index: self.decision_log.len() as u64,
                trial_id: r.trial_id,
                resource: r.resource,
                decision,
            });
            decisions.push(decision);
        }
        Ok(decisions)
    }

    /// Best trial at the highest rung holding any record. Ties go to the
    /// earlier-recorded trial.
    pub fn best_trial(&self) -> Result<(TrialId, f64, u32), AshaError> {
        let (resource, entries) =
            self.rungs.iter().rev().find(|(_, e)| !e.is_empty()).ok_or(AshaError::Empty)?;
        let mode = self.config.metric_mode;
        let best = entries
            .iter()
            .fold(None::<&RungEntry>, |best, e| match best {
                Some(b) if !mode.better(e.metric, b.metric) => Some(b),
                _ => Some(e),
            })
            .expect("non-empty rung");
        Ok((best.trial_id, best.metric, *resource))
    }

    /// Trials that were allowed past the rung at `resource`.
    pub fn survivors(&self, resource: u32) -> Vec<TrialId> {
        self.decision_log
            .iter()
            .filter(|d| d.resource == resource && d.decision != Decision::Stop)
            .map(|d| d.trial_id)
            .collect()
    }
}
