use crate::asha::TrialId;
use crate::hyperspace::TrialConfig;
use crate::seed::{derive, Stream};

use super::{Action, EpochResult, ExecError, SessionEvent, StartTrial, TrialExecutor, TrialSession};

const PLATEAU_PEAK: f64 = 0.70;
const CURVE_EPOCHS: f64 = 20.0;
const NOISE_HALF_WIDTH: f64 = 0.005;
const BONUS_STEP: f64 = 0.02;
const M_LEVELS: [u32; 4] = [2, 6, 10, 14];

/// Closed-form learning curves whose optimum sits exactly on
/// [`TrialConfig::TUNED`]. The 0.70 ceiling is an arbitrary constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticObjective {
    pub seed: u64,
}

impl SyntheticObjective {
    pub fn new(seed: u64) -> Self {
        SyntheticObjective { seed }
    }

    /// RandAugment term: 1 at `N = 2, M = 14`, minus 0.02 per unit of `|N − 2|`
    /// and per position `M` sits away from 14 in `{2, 6, 10, 14}`.
    pub fn bonus(n: u32, m: u32) -> f64 {
        let target = M_LEVELS.len() as i64 - 1;
        let m_steps = match M_LEVELS.iter().position(|v| *v == m) {
            Some(i) => (target - i as i64).unsigned_abs() as f64,
            // off-grid M: distance in units of the grid spacing
            None => (14.0 - m as f64).abs() / 4.0,
        };
        1.0 - BONUS_STEP * ((n as f64 - 2.0).abs() + m_steps)
    }

    /// Noise-free asymptotic metric of a configuration.
    pub fn plateau(config: &TrialConfig) -> f64 {
        let tuned = TrialConfig::TUNED;
        let dlr = config.learning_rate.log10() - tuned.learning_rate.log10();
        let dwd = config.weight_decay.log10() - tuned.weight_decay.log10();
        PLATEAU_PEAK
            * (-dlr * dlr / 2.0).exp()
            * (-dwd * dwd / 8.0).exp()
            * Self::bonus(config.randaugment_n, config.randaugment_m)
    }

    /// Uniform in `±0.005`, a pure function of `(seed, trial, epoch)`.
    pub fn noise(&self, trial: TrialId, epoch: u32) -> f64 {
        let bits = derive(derive(self.seed, Stream::Trial, trial.0 as u64), Stream::Data, epoch as u64);
        let unit = (bits >> 11) as f64 / (1u64 << 53) as f64;
        (2.0 * unit - 1.0) * NOISE_HALF_WIDTH
    }

    /// `plateau·(1 − exp(−epoch/20)) + noise`.
    pub fn metric(&self, config: &TrialConfig, trial: TrialId, epoch: u32) -> f64 {
        Self::plateau(config) * (1.0 - (-(epoch as f64) / CURVE_EPOCHS).exp()) + self.noise(trial, epoch)
    }
}

/// Runs trials against a [`SyntheticObjective`] seeded per trial.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticExecutor;

impl TrialExecutor for SyntheticExecutor {
    fn start(&self, start: &StartTrial) -> Result<Box<dyn TrialSession>, ExecError> {
        Ok(Box::new(SyntheticSession {
            start: *start,
            objective: SyntheticObjective::new(start.seed),
            epoch: 0,
            last_metric: 0.0,
            finished: false,
            awaiting_decision: false,
        }))
    }
}

struct SyntheticSession {
    start: StartTrial,
    objective: SyntheticObjective,
    epoch: u32,
    last_metric: f64,
    finished: bool,
    awaiting_decision: bool,
}

impl TrialSession for SyntheticSession {
    fn next_event(&mut self) -> Result<SessionEvent, ExecError> {
        let trial_id = self.start.trial_id;
        if self.awaiting_decision {
            return Err(ExecError::Other(format!("trial {trial_id}: decision pending")));
        }
        if self.finished || self.epoch >= self.start.max_epochs {
            self.finished = true;
            return Ok(SessionEvent::Done { final_metric: self.last_metric });
        }
        self.epoch += 1;
        self.last_metric = self.objective.metric(&self.start.config, trial_id, self.epoch);
        self.awaiting_decision = true;
        Ok(SessionEvent::Result(EpochResult { trial_id, epoch: self.epoch, metric: self.last_metric }))
    }

    fn send_decision(&mut self, action: Action) -> Result<(), ExecError> {
        if !self.awaiting_decision {
            return Err(ExecError::Finished(self.start.trial_id));
        }
        self.awaiting_decision = false;
        if action == Action::Stop {
            self.finished = true;
        }
        Ok(())
    }
}
