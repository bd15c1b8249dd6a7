use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;

use crate::asha::{AshaState, Decision, TrialId, TrialStatus};
use crate::executor::{Action, EpochResult, ExecError, Phase, SessionEvent, StartTrial, TrialExecutor, TrialSession};
use crate::hyperspace::{SearchSpace, TrialConfig};
use crate::seed::{derive, stream_rng, Rng, Stream};
use crate::asha::AshaConfig;

use super::events::{BestTrial, EventLog, EventPayload};
use super::OrchestratorError;

/// How sessions are interleaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Driver {
    /// Single thread; active sessions advance one epoch each per round, in
    /// launch order. Fully deterministic.
    #[default]
    Lockstep,
    /// One thread per running session, events handled in arrival order.
    Threaded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSettings {
    pub seed: u64,
    pub search_space: SearchSpace,
    pub asha: AshaConfig,
    pub parallelism: usize,
    pub driver: Driver,
}

impl CampaignSettings {
    pub fn new(seed: u64, asha: AshaConfig) -> Self {
        CampaignSettings { seed, search_space: SearchSpace::default(), asha, parallelism: 1, driver: Driver::Lockstep }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub best: BestTrial,
    pub best_config: TrialConfig,
    pub state: AshaState,
    pub configs: BTreeMap<TrialId, TrialConfig>,
    /// Last reported metric of every trial that ended normally.
    pub final_metrics: BTreeMap<TrialId, f64>,
    pub epochs_used: u64,
}

impl CampaignOutcome {
    /// Best final metric among trials trained to `max_resource`.
    pub fn best_completed_metric(&self) -> Option<f64> {
        self.final_metrics
            .iter()
            .filter(|(id, _)| self.state.status(**id) == Some(TrialStatus::Completed))
            .map(|(_, m)| *m)
            .fold(None, |best: Option<f64>, m| Some(best.map_or(m, |b| b.max(m))))
    }
}

pub fn trial_seed(campaign_seed: u64, trial: TrialId) -> u64 {
    derive(campaign_seed, Stream::Trial, trial.0 as u64)
}

struct Coordinator<'a> {
    settings: &'a CampaignSettings,
    state: AshaState,
    log: &'a mut EventLog,
    sampler: Rng,
    next: u32,
    configs: BTreeMap<TrialId, TrialConfig>,
    epochs: BTreeMap<TrialId, u32>,
    final_metrics: BTreeMap<TrialId, f64>,
}

impl<'a> Coordinator<'a> {
    fn new(settings: &'a CampaignSettings, log: &'a mut EventLog) -> Result<Self, OrchestratorError> {
        if settings.parallelism < 1 {
            return Err(OrchestratorError::Config("parallelism must be at least 1".into()));
        }
        let state = AshaState::new(settings.asha).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        log.append(EventPayload::CampaignStarted {
            seed: settings.seed,
            parallelism: settings.parallelism,
            asha: settings.asha,
            search_space: settings.search_space.clone(),
        })?;
        Ok(Coordinator {
            settings,
            state,
            log,
            sampler: stream_rng(settings.seed, Stream::Sampler, 0),
            next: 0,
            configs: BTreeMap::new(),
            epochs: BTreeMap::new(),
            final_metrics: BTreeMap::new(),
        })
    }

    fn has_next(&self) -> bool {
        self.next < self.settings.asha.num_trials
    }

    fn launch(&mut self) -> Result<StartTrial, OrchestratorError> {
        let trial_id = TrialId(self.next);
        self.next += 1;
        let config = self.settings.search_space.sample_config(&mut self.sampler);
        let seed = trial_seed(self.settings.seed, trial_id);
        self.state.register(trial_id).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        self.configs.insert(trial_id, config);
        self.log.append(EventPayload::TrialSampled { trial_id, config, seed })?;
        self.log.append(EventPayload::TrialStarted { trial_id })?;
        Ok(StartTrial { trial_id, config, max_epochs: self.settings.asha.max_resource, seed, phase: Phase::Tune })
    }

    /// Outer error: the log failed. Inner error: the result is unusable and
    /// the trial must be failed with that reason.
    fn on_result(&mut self, trial: TrialId, r: EpochResult) -> Result<Result<Action, String>, OrchestratorError> {
        if r.trial_id != trial {
            return Ok(Err(format!("result for trial {} on the session of {trial}", r.trial_id)));
        }
        let decision = match self.state.record_and_decide(trial, r.epoch, r.metric) {
            Ok(d) => d,
            Err(e) => return Ok(Err(e.to_string())),
        };
        self.epochs.insert(trial, r.epoch);
        self.log.append(EventPayload::Result { trial_id: trial, epoch: r.epoch, metric: r.metric })?;
        self.log.append(EventPayload::Decision { trial_id: trial, resource: r.epoch, decision })?;
        Ok(Ok(match decision {
            Decision::Stop => Action::Stop,
            Decision::Continue | Decision::Complete => Action::Continue,
        }))
    }

    fn is_decided(&self, trial: TrialId) -> bool {
        self.state.status(trial) != Some(TrialStatus::Running)
    }

    fn on_done(&mut self, trial: TrialId, final_metric: f64) -> Result<(), OrchestratorError> {
        let epochs = self.epochs.get(&trial).copied().unwrap_or(0);
        match self.state.status(trial) {
            Some(status @ (TrialStatus::Stopped | TrialStatus::Completed)) => {
                self.final_metrics.insert(trial, final_metric);
                self.log.append(EventPayload::TrialDone { trial_id: trial, status, epochs, final_metric })?;
                Ok(())
            }
            _ => self.on_failure(trial, format!("session ended at epoch {epochs} without a terminal decision")),
        }
    }

    fn on_failure(&mut self, trial: TrialId, reason: String) -> Result<(), OrchestratorError> {
        if self.state.status(trial) == Some(TrialStatus::Running) {
            self.state.mark_failed(trial).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        }
        let epochs = self.epochs.get(&trial).copied().unwrap_or(0);
        self.log.append(EventPayload::TrialFailed { trial_id: trial, epochs, reason })?;
        Ok(())
    }

    fn finish(self) -> Result<CampaignOutcome, OrchestratorError> {
        let best = self.state.best_trial().ok().map(|(trial_id, metric, resource)| BestTrial { trial_id, metric, resource });
        self.log.append(EventPayload::CampaignDone { best })?;
        let best = best.ok_or(OrchestratorError::AllFailed)?;
        Ok(CampaignOutcome {
            best_config: self.configs[&best.trial_id],
            best,
            epochs_used: self.epochs.values().map(|e| *e as u64).sum(),
            state: self.state,
            configs: self.configs,
            final_metrics: self.final_metrics,
        })
    }
}

/// Samples `num_trials` configurations, runs them with at most `parallelism`
/// sessions alive, routes every epoch result through the scheduler and logs
/// each step. Failed trials count towards the budget; the campaign itself
/// fails only when no trial produced a rung result.
pub fn run_campaign(
    settings: &CampaignSettings,
    executor: &dyn TrialExecutor,
    log: &mut EventLog,
) -> Result<CampaignOutcome, OrchestratorError> {
    let mut coord = Coordinator::new(settings, log)?;
    match settings.driver {
        Driver::Lockstep => drive_lockstep(&mut coord, executor)?,
        Driver::Threaded => drive_threaded(&mut coord, executor)?,
    }
    coord.finish()
}

/// Advances one session by one event. Returns whether it has ended.
fn step(coord: &mut Coordinator, trial: TrialId, session: &mut dyn TrialSession) -> Result<bool, OrchestratorError> {
    match session.next_event() {
        Ok(SessionEvent::Result(r)) => match coord.on_result(trial, r)? {
            Ok(action) => {
                if let Err(e) = session.send_decision(action) {
                    coord.on_failure(trial, e.to_string())?;
                    return Ok(true);
                }
                if !coord.is_decided(trial) {
                    return Ok(false);
                }
                match session.next_event() {
                    Ok(SessionEvent::Done { final_metric }) => coord.on_done(trial, final_metric)?,
                    Ok(SessionEvent::Result(r)) => {
                        coord.on_failure(trial, format!("result for epoch {} after the final decision", r.epoch))?
                    }
                    Err(e) => coord.on_failure(trial, e.to_string())?,
                }
                Ok(true)
            }
            Err(reason) => {
                coord.on_failure(trial, reason)?;
                Ok(true)
            }
        },
        Ok(SessionEvent::Done { final_metric }) => {
            coord.on_done(trial, final_metric)?;
            Ok(true)
        }
        Err(e) => {
            coord.on_failure(trial, e.to_string())?;
            Ok(true)
        }
    }
}

fn drive_lockstep(coord: &mut Coordinator, executor: &dyn TrialExecutor) -> Result<(), OrchestratorError> {
    let mut active: Vec<(TrialId, Box<dyn TrialSession>)> = Vec::new();
    loop {
        while active.len() < coord.settings.parallelism && coord.has_next() {
            let start = coord.launch()?;
            match executor.start(&start) {
                Ok(session) => active.push((start.trial_id, session)),
                Err(e) => coord.on_failure(start.trial_id, e.to_string())?,
            }
        }
        if active.is_empty() {
            return Ok(());
        }
        let mut i = 0;
        while i < active.len() {
            let (trial, session) = &mut active[i];
            if step(coord, *trial, session.as_mut())? {
                active.remove(i);
            } else {
                i += 1;
            }
        }
    }
}

type Inbox = Sender<(TrialId, Result<SessionEvent, ExecError>)>;

fn session_thread(executor: &dyn TrialExecutor, start: StartTrial, outbox: Inbox, actions: Receiver<Action>) {
    let id = start.trial_id;
    let mut session = match executor.start(&start) {
        Ok(s) => s,
        Err(e) => {
            let _ = outbox.send((id, Err(e)));
            return;
        }
    };
    loop {
        let event = session.next_event();
        let more = matches!(event, Ok(SessionEvent::Result(_)));
        if outbox.send((id, event)).is_err() || !more {
            return;
        }
        let Ok(action) = actions.recv() else { return };
        if let Err(e) = session.send_decision(action) {
            let _ = outbox.send((id, Err(e)));
            return;
        }
    }
}

fn drive_threaded(coord: &mut Coordinator, executor: &dyn TrialExecutor) -> Result<(), OrchestratorError> {
    let (outbox, inbox) = mpsc::channel();
    thread::scope(|scope| {
        let mut replies: BTreeMap<TrialId, Sender<Action>> = BTreeMap::new();
        loop {
            while replies.len() < coord.settings.parallelism && coord.has_next() {
                let start = coord.launch()?;
                let (tx, rx) = mpsc::channel();
                replies.insert(start.trial_id, tx);
                let outbox = outbox.clone();
                scope.spawn(move || session_thread(executor, start, outbox, rx));
            }
            if replies.is_empty() {
                return Ok(());
            }
            let (trial, event) = inbox.recv().expect("coordinator holds a sender");
            match event {
                Ok(SessionEvent::Result(r)) => match coord.on_result(trial, r)? {
                    Ok(action) => {
                        let _ = replies[&trial].send(action);
                    }
                    Err(reason) => {
                        replies.remove(&trial);
                        coord.on_failure(trial, reason)?;
                    }
                },
                Ok(SessionEvent::Done { final_metric }) => {
                    replies.remove(&trial);
                    coord.on_done(trial, final_metric)?;
                }
                Err(e) => {
                    replies.remove(&trial);
                    coord.on_failure(trial, e.to_string())?;
                }
            }
        }
    })
}

/// Trains one session to its end, continuing at every epoch. Returns the
/// number of epochs reported and the final metric.
pub fn run_to_completion(session: &mut dyn TrialSession) -> Result<(u32, f64), ExecError> {
    let mut epochs = 0;
    loop {
        match session.next_event()? {
            SessionEvent::Result(r) => {
                epochs = r.epoch;
                session.send_decision(Action::Continue)?;
            }
            SessionEvent::Done { final_metric } => return Ok((epochs, final_metric)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSearchOutcome {
    pub trials: u32,
    pub epochs_used: u64,
    /// Best configuration and its final metric, if any trial finished.
    pub best: Option<(TrialConfig, f64)>,
}

/// Baseline: full-length trials of random configurations until the next one
/// would exceed `epoch_budget`.
pub fn run_random_search(
    seed: u64,
    space: &SearchSpace,
    max_resource: u32,
    epoch_budget: u64,
    executor: &dyn TrialExecutor,
) -> Result<RandomSearchOutcome, OrchestratorError> {
    let base = derive(seed, Stream::Sampler, 1);
    let mut sampler = stream_rng(base, Stream::Sampler, 0);
    let mut out = RandomSearchOutcome { trials: 0, epochs_used: 0, best: None };
    while out.epochs_used + max_resource as u64 <= epoch_budget {
        let trial_id = TrialId(out.trials);
        let config = space.sample_config(&mut sampler);
        let start = StartTrial { trial_id, config, max_epochs: max_resource, seed: trial_seed(base, trial_id), phase: Phase::Tune };
        out.trials += 1;
        let result = executor.start(&start).and_then(|mut s| run_to_completion(s.as_mut()));
        match result {
            Ok((epochs, metric)) => {
                out.epochs_used += epochs as u64;
                if out.best.is_none_or(|(_, b)| metric > b) {
                    out.best = Some((config, metric));
                }
            }
            Err(_) => out.epochs_used += max_resource as u64,
        }
    }
    Ok(out)
}
