//! Reference trial: binary logistic regression trained by minibatch SGD on
//! two isotropic Gaussian blobs. Small enough to run hundreds of trials in a
//! test, real enough that learning rate, weight decay and batch size matter.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::asha::TrialId;
use crate::ensemble::{ModelPredictions, SampleId};
use crate::hyperspace::TrialConfig;
use crate::optim::{cosine_lr, sgd_momentum_step, OptimizerConfig};
use crate::seed::{rng_from, Rng as SeedRng};

use super::{Action, EpochResult, ExecError, Phase, SessionEvent, StartTrial, TrialExecutor, TrialSession};

/// Shape of the generated dataset. Class means sit at `±separation·u` for a
/// unit vector `u`, so the Bayes-optimal accuracy is `Φ(separation / sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec { dim: 4, separation: 2.0, sigma: 1.0, n_train: 400, n_val: 400, n_test: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobData {
    pub spec: BlobSpec,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl BlobData {
    pub fn generate(spec: BlobSpec, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let direction = 1.0 / (spec.dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<Sample> {
            (0..n)
                .map(|i| {
                    let label = (i % 2) as u8;
                    let sign = if label == 1 { 1.0 } else { -1.0 };
                    let features = (0..spec.dim)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            sign * spec.separation * direction + spec.sigma * z
                        })
                        .collect();
                    Sample { features, label }
                })
                .collect()
        };
        let train = draw(spec.n_train);
        let val = draw(spec.n_val);
        let test = draw(spec.n_test);
        BlobData { spec, train, val, test }
    }

    /// Test-set labels keyed by sample position, matching the ids used in
    /// [`LogisticModel::predictions`].
    pub fn test_labels(&self) -> BTreeMap<SampleId, usize> {
        self.test.iter().enumerate().map(|(i, s)| (SampleId::from(i), s.label as usize)).collect()
    }
}

/// Training split of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSplit {
    /// Train on `train`, report accuracy on `val`.
    Train,
    /// Train on `train ∪ val`, report accuracy on `test`.
    Combined,
}

/// Input features fed to the linear model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMap {
    #[default]
    Linear,
    /// `[x, x²]`: a larger model for the architecture ablation step.
    Quadratic,
}

impl FeatureMap {
    pub fn width(self, dim: usize) -> usize {
        match self {
            FeatureMap::Linear => dim,
            FeatureMap::Quadratic => 2 * dim,
        }
    }

    fn apply(self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
        if self == FeatureMap::Quadratic {
            out.extend(x.iter().map(|v| v * v));
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean binary cross-entropy over `batch` and its gradient. `params` holds the
/// feature weights followed by the bias.
pub fn logistic_loss_and_grad(params: &[f64], batch: &[&Sample], features: FeatureMap) -> (f64, Vec<f64>) {
    let width = params.len() - 1;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut phi = Vec::with_capacity(width);
    for s in batch {
        features.apply(&s.features, &mut phi);
        let z = params[..width].iter().zip(&phi).map(|(w, x)| w * x).sum::<f64>() + params[width];
        let y = s.label as f64;
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, x) in grad[..width].iter_mut().zip(&phi) {
            *g += residual * x;
        }
        grad[width] += residual;
    }
    let n = batch.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub params: Vec<f64>,
    pub features: FeatureMap,
}

impl LogisticModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut phi = Vec::new();
        self.features.apply(x, &mut phi);
        let width = self.params.len() - 1;
        self.params[..width].iter().zip(&phi).map(|(w, v)| w * v).sum::<f64>() + self.params[width]
    }

    /// Two-class logit vector `[0, z]`; its softmax is `[1 − σ(z), σ(z)]`.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0, self.logit(x)]
    }

    pub fn accuracy(&self, samples: &[Sample]) -> f64 {
        let correct = samples.iter().filter(|s| (self.logit(&s.features) > 0.0) == (s.label == 1)).count();
        correct as f64 / samples.len().max(1) as f64
    }

    pub fn predictions(&self, model_id: impl Into<String>, samples: &[Sample]) -> ModelPredictions {
        let mut out = ModelPredictions::new(model_id);
        for (i, s) in samples.iter().enumerate() {
            let p = sigmoid(self.logit(&s.features));
            out.insert(i, vec![1.0 - p, p]).expect("sigmoid output is a distribution");
        }
        out
    }
}

fn training_set(data: &BlobData, split: TrainSplit) -> Vec<&Sample> {
    match split {
        TrainSplit::Train => data.train.iter().collect(),
        TrainSplit::Combined => data.train.iter().chain(&data.val).collect(),
    }
}

/// One training run, advanced an epoch at a time.
pub struct LogisticTrial {
    trial_id: TrialId,
    data: Arc<BlobData>,
    split: TrainSplit,
    batch_size: usize,
    optimizer: OptimizerConfig,
    model: LogisticModel,
    velocity: Vec<f64>,
    rng: SeedRng,
    epoch: u32,
    max_epochs: u32,
}

impl LogisticTrial {
    pub fn new(
        trial_id: TrialId,
        data: Arc<BlobData>,
        config: &TrialConfig,
        max_epochs: u32,
        seed: u64,
        split: TrainSplit,
        features: FeatureMap,
    ) -> Result<Self, ExecError> {
        let optimizer = OptimizerConfig::new(config.learning_rate, config.weight_decay, max_epochs as u64)
            .map_err(|e| ExecError::Other(e.to_string()))?;
        let mut rng = rng_from(seed);
        let n_params = features.width(data.spec.dim) + 1;
        let params = (0..n_params).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        Ok(LogisticTrial {
            trial_id,
            data,
            split,
            batch_size: config.batch_size.max(1) as usize,
            optimizer,
            model: LogisticModel { params, features },
            velocity: vec![0.0; n_params],
            rng,
            epoch: 0,
            max_epochs,
        })
    }

    pub fn model(&self) -> &LogisticModel {
        &self.model
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn training_set(&self) -> Vec<&Sample> {
        training_set(&self.data, self.split)
    }

    pub fn held_out(&self) -> &[Sample] {
        match self.split {
            TrainSplit::Train => &self.data.val,
            TrainSplit::Combined => &self.data.test,
        }
    }

    /// One pass of shuffled minibatch SGD at the epoch's cosine learning rate,
    /// followed by held-out evaluation.
    pub fn run_epoch(&mut self) -> Result<EpochResult, ExecError> {
        if self.epoch >= self.max_epochs {
            return Err(ExecError::Finished(self.trial_id));
        }
        let lr = cosine_lr(self.epoch as u64, &self.optimizer).map_err(|e| ExecError::Other(e.to_string()))?;
        let data = self.data.clone();
        let mut order = training_set(&data, self.split);
        order.shuffle(&mut self.rng);
        for batch in order.chunks(self.batch_size) {
            let (loss, grad) = logistic_loss_and_grad(&self.model.params, batch, self.model.features);
            if !loss.is_finite() {
                return Err(ExecError::Diverged(self.trial_id));
            }
            sgd_momentum_step(&mut self.model.params, &grad, &mut self.velocity, lr, &self.optimizer)
                .map_err(|_| ExecError::Diverged(self.trial_id))?;
        }
        if !self.model.params.iter().all(|p| p.is_finite()) {
            return Err(ExecError::Diverged(self.trial_id));
        }
        self.epoch += 1;
        Ok(EpochResult { trial_id: self.trial_id, epoch: self.epoch, metric: self.model.accuracy(self.held_out()) })
    }
}

/// Runs [`LogisticTrial`]s on a dataset shared by the whole campaign.
#[derive(Clone)]
pub struct LogisticExecutor {
    data: Arc<BlobData>,
    features: FeatureMap,
}

impl LogisticExecutor {
    pub fn new(data: BlobData) -> Self {
        LogisticExecutor { data: Arc::new(data), features: FeatureMap::Linear }
    }

    pub fn with_features(mut self, features: FeatureMap) -> Self {
        self.features = features;
        self
    }

    pub fn data(&self) -> &Arc<BlobData> {
        &self.data
    }

    pub fn trial(&self, start: &StartTrial, split: TrainSplit) -> Result<LogisticTrial, ExecError> {
        LogisticTrial::new(start.trial_id, self.data.clone(), &start.config, start.max_epochs, start.seed, split, self.features)
    }
}

impl TrialExecutor for LogisticExecutor {
    fn start(&self, start: &StartTrial) -> Result<Box<dyn TrialSession>, ExecError> {
        let split = match start.phase {
            Phase::Tune => TrainSplit::Train,
            Phase::Final => TrainSplit::Combined,
        };
        Ok(Box::new(LogisticSession { trial: self.trial(start, split)?, last: 0.0, awaiting: false, finished: false }))
    }
}

struct LogisticSession {
    trial: LogisticTrial,
    last: f64,
    awaiting: bool,
    finished: bool,
}

impl TrialSession for LogisticSession {
    fn next_event(&mut self) -> Result<SessionEvent, ExecError> {
        if self.awaiting {
            return Err(ExecError::Other(format!("trial {}: decision pending", self.trial.trial_id)));
        }
        if self.finished || self.trial.epoch >= self.trial.max_epochs {
            self.finished = true;
            return Ok(SessionEvent::Done { final_metric: self.last });
        }
        let r = self.trial.run_epoch()?;
        self.last = r.metric;
        self.awaiting = true;
        Ok(SessionEvent::Result(r))
    }

    fn send_decision(&mut self, action: Action) -> Result<(), ExecError> {
        if !self.awaiting {
            return Err(ExecError::Finished(self.trial.trial_id));
        }
        self.awaiting = false;
        self.finished |= action == Action::Stop;
        Ok(())
    }

    fn predictions(&mut self) -> Option<ModelPredictions> {
        let id = format!("trial-{}", self.trial.trial_id.0);
        Some(self.trial.model.predictions(id, self.trial.held_out()))
    }
}
