//! Cosine-annealed SGD with momentum and coupled weight decay.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    Config(&'static str),
    #[error("step {step} outside schedule horizon [0, {horizon}]")]
    StepOutOfRange { step: u64, horizon: u64 },
    #[error("length mismatch: params {params}, grads {grads}, velocity {velocity}")]
    LengthMismatch { params: usize, grads: usize, velocity: usize },
    #[error("non-finite input")]
    NonFinite,
}

/// How often the learning rate is re-evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleGranularity {
    #[default]
    Epoch,
    Iteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub initial_lr: f64,
    pub min_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Schedule horizon `T`, in epochs or iterations depending on `granularity`.
    pub total_steps: u64,
    pub granularity: ScheduleGranularity,
}

impl OptimizerConfig {
    pub const MOMENTUM: f64 = 0.9;

    /// Epoch-stepped schedule annealing to zero with momentum 0.9.
    pub fn new(initial_lr: f64, weight_decay: f64, total_steps: u64) -> Result<Self, OptimError> {
        let cfg = OptimizerConfig {
            initial_lr,
            min_lr: 0.0,
            momentum: Self::MOMENTUM,
            weight_decay,
            total_steps,
            granularity: ScheduleGranularity::Epoch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(0.0 <= self.min_lr && self.min_lr <= self.initial_lr && self.initial_lr.is_finite()) {
            return Err(OptimError::Config("need 0 <= min_lr <= initial_lr"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(OptimError::Config("need 0 <= momentum < 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(OptimError::Config("need weight_decay >= 0"));
        }
        if self.total_steps < 1 {
            return Err(OptimError::Config("need total_steps >= 1"));
        }
        Ok(())
    }

    /// Schedule step for the `iteration`-th minibatch (0-based) of `epoch` (0-based).
    pub fn step_index(&self, epoch: u64, iteration: u64, iterations_per_epoch: u64) -> u64 {
        match self.granularity {
            ScheduleGranularity::Epoch => epoch,
            ScheduleGranularity::Iteration => epoch * iterations_per_epoch + iteration,
        }
    }
}

/// `min + ½(initial − min)(1 + cos(π·t/T))`.
pub fn cosine_lr(step: u64, cfg: &OptimizerConfig) -> Result<f64, OptimError> {
    let horizon = cfg.total_steps;
    if step > horizon {
        return Err(OptimError::StepOutOfRange { step, horizon });
    }
    // Endpoints are returned exactly; the midpoint of the cosine is not needed exactly.
    if step == 0 {
        return Ok(cfg.initial_lr);
    }
    if step == horizon {
        return Ok(cfg.min_lr);
    }
    let phase = std::f64::consts::PI * step as f64 / horizon as f64;
    Ok(cfg.min_lr + 0.5 * (cfg.initial_lr - cfg.min_lr) * (1.0 + phase.cos()))
}

/// One heavy-ball step with L2 weight decay folded into the gradient:
///
/// ```text
/// g' = g + wd·p
/// v' = μ·v + g'
/// p' = p − lr·v'
/// ```
///
/// Updates `params` and `velocity` in place.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<(), OptimError> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(OptimError::LengthMismatch {
            params: params.len(),
            grads: grads.len(),
            velocity: velocity.len(),
        });
    }
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    if !(finite(params) && finite(grads) && finite(velocity) && lr.is_finite()) {
        return Err(OptimError::NonFinite);
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        let g = g + cfg.weight_decay * *p;
        *v = cfg.momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}
