use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::asha::TrialId;
use crate::ensemble::ModelPredictions;
use crate::executor::{Phase, StartTrial, TrialExecutor};
use crate::hyperspace::TrialConfig;
use crate::seed::{derive, Stream};

use super::campaign::run_to_completion;
use super::{CampaignConfig, OrchestratorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinalSettings {
    pub seed: u64,
    pub epochs: u32,
    pub ensemble_count: u32,
    pub parallelism: usize,
}

impl From<&CampaignConfig> for FinalSettings {
    fn from(c: &CampaignConfig) -> Self {
        FinalSettings {
            seed: c.seed,
            epochs: c.final_epochs(),
            ensemble_count: c.ensemble_count,
            parallelism: c.parallelism,
        }
    }
}

/// Seed of ensemble member `k`. It drives both weight initialization and
/// data order of that run.
pub fn member_seed(campaign_seed: u64, k: u32) -> u64 {
    derive(campaign_seed, Stream::EnsembleMember, k as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberRun {
    pub index: u32,
    pub seed: u64,
    pub epochs: u32,
    pub final_metric: f64,
    pub predictions: Option<ModelPredictions>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FinalOutcome {
    pub members: Vec<MemberRun>,
    pub failures: Vec<(u32, String)>,
}

impl FinalOutcome {
    /// Predictions of every member that produced them, in member order.
    pub fn predictions(&self) -> Vec<ModelPredictions> {
        self.members.iter().filter_map(|m| m.predictions.clone()).collect()
    }
}

/// Trains `ensemble_count` independent runs of `best` on the combined split.
/// Failed runs are reported; at least one must succeed.
pub fn final_train(
    best: &TrialConfig,
    settings: &FinalSettings,
    executor: &dyn TrialExecutor,
) -> Result<FinalOutcome, OrchestratorError> {
    let next = AtomicU32::new(0);
    let results = Mutex::new(Vec::new());
    let workers = settings.parallelism.clamp(1, settings.ensemble_count.max(1) as usize);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= settings.ensemble_count {
                    return;
                }
                let seed = member_seed(settings.seed, k);
                let start =
                    StartTrial { trial_id: TrialId(k), config: *best, max_epochs: settings.epochs, seed, phase: Phase::Final };
                let outcome = executor.start(&start).and_then(|mut session| {
                    let (epochs, final_metric) = run_to_completion(session.as_mut())?;
                    let predictions = session.predictions().map(|mut p| {
                        p.model_id = format!("member-{k:02}");
                        p
                    });
                    Ok(MemberRun { index: k, seed, epochs, final_metric, predictions })
                });
                results.lock().expect("no panics while held").push((k, outcome.map_err(|e| e.to_string())));
            });
        }
    });
    let mut results = results.into_inner().expect("workers joined");
    results.sort_by_key(|(k, _)| *k);
    let mut out = FinalOutcome::default();
    for (k, r) in results {
        match r {
            Ok(m) => out.members.push(m),
            Err(e) => out.failures.push((k, e)),
        }
    }
    if out.members.is_empty() {
        return Err(OrchestratorError::AllFailed);
    }
    Ok(out)
}
