use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asha::TrialId;
use crate::ensemble::{ensemble_accuracy, ModelPredictions};
use crate::executor::{FeatureMap, LogisticTrial, SyntheticObjective, TrainSplit};
use crate::hyperspace::TrialConfig;
use crate::tta::{aggregate_predictions, softmax, PredictionVector, VIEW_COUNT};

use super::config::ExecutorKind;
use super::final_train::member_seed;
use super::{CampaignConfig, OrchestratorError};

/// One incremental addition to the single-model baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationStep {
    CombinedSplit,
    DoubledEpochs,
    DeeperModel,
    Tta,
    Ensembling,
}

impl AblationStep {
    pub const ALL: [AblationStep; 5] = [
        AblationStep::CombinedSplit,
        AblationStep::DoubledEpochs,
        AblationStep::DeeperModel,
        AblationStep::Tta,
        AblationStep::Ensembling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationStep::CombinedSplit => "combined-split",
            AblationStep::DoubledEpochs => "doubled-epochs",
            AblationStep::DeeperModel => "deeper-model",
            AblationStep::Tta => "tta",
            AblationStep::Ensembling => "ensembling",
        }
    }
}

impl fmt::Display for AblationStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationStep {
    type Err = OrchestratorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| OrchestratorError::UnknownStep(s.to_string()))
    }
}

/// Parses a comma-separated step list. Repeats are rejected.
pub fn parse_steps(list: &str) -> Result<Vec<AblationStep>, OrchestratorError> {
    let mut steps: Vec<AblationStep> = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let step: AblationStep = name.parse()?;
        if steps.contains(&step) {
            return Err(OrchestratorError::UnknownStep(format!("{name} (repeated)")));
        }
        steps.push(step);
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    /// `baseline` or the step enabled on top of the previous row.
    pub step: String,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Toggles {
    combined: bool,
    doubled: bool,
    deeper: bool,
    tta: bool,
    ensembling: bool,
}

impl Toggles {
    fn enable(&mut self, step: AblationStep) {
        match step {
            AblationStep::CombinedSplit => self.combined = true,
            AblationStep::DoubledEpochs => self.doubled = true,
            AblationStep::DeeperModel => self.deeper = true,
            AblationStep::Tta => self.tta = true,
            AblationStep::Ensembling => self.ensembling = true,
        }
    }
}

/// Evaluates the pipeline with steps enabled cumulatively, one row per prefix
/// of `steps`.
///
/// With the logistic executor every row is test-set accuracy. With the
/// synthetic executor a row is the mean final metric of its runs; only the
/// epoch count changes it.
pub fn run_ablation(
    config: &CampaignConfig,
    trial: &TrialConfig,
    steps: &[AblationStep],
) -> Result<Vec<AblationRow>, OrchestratorError> {
    let data = match config.executor.kind {
        ExecutorKind::Logistic => Some(Arc::new(config.blob_data())),
        ExecutorKind::Synthetic => None,
        ExecutorKind::External => {
            return Err(OrchestratorError::Unsupported("ablation runs in-process executors only".into()))
        }
    };
    let mut toggles = Toggles::default();
    let mut rows = Vec::with_capacity(steps.len() + 1);
    for i in 0..=steps.len() {
        let label = if i == 0 { "baseline".to_string() } else { steps[i - 1].name().to_string() };
        if i > 0 {
            toggles.enable(steps[i - 1]);
        }
        let epochs = config.asha.max_resource * if toggles.doubled { config.final_epochs_multiplier } else { 1 };
        let members = if toggles.ensembling { config.ensemble_count } else { 1 };
        let metric = match &data {
            Some(data) => {
                let split = if toggles.combined { TrainSplit::Combined } else { TrainSplit::Train };
                let features = if toggles.deeper { FeatureMap::Quadratic } else { config.executor.features };
                let mut preds = Vec::with_capacity(members as usize);
                for k in 0..members {
                    let seed = member_seed(config.seed, k);
                    let mut run = LogisticTrial::new(TrialId(k), data.clone(), trial, epochs, seed, split, features)?;
                    for _ in 0..epochs {
                        run.run_epoch()?;
                    }
                    let mut p = ModelPredictions::new(format!("member-{k:02}"));
                    for (s, sample) in data.test.iter().enumerate() {
                        let logits = run.model().logits(&sample.features);
                        let probs = if toggles.tta {
                            let views = vec![PredictionVector::logits(logits); VIEW_COUNT];
                            aggregate_predictions(&views).map_err(|e| OrchestratorError::Unsupported(e.to_string()))?.values
                        } else {
                            softmax(&logits)
                        };
                        p.insert(s, probs)?;
                    }
                    preds.push(p);
                }
                ensemble_accuracy(&preds, &data.test_labels())?
            }
            None => {
                let total: f64 = (0..members)
                    .map(|k| SyntheticObjective::new(member_seed(config.seed, k)).metric(trial, TrialId(k), epochs))
                    .sum();
                total / members as f64
            }
        };
        rows.push(AblationRow { step: label, metric });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asha::AshaConfig;
    use crate::executor::BlobSpec;
    use crate::orchestrator::config::ExecutorSection;

    fn logistic_config() -> CampaignConfig {
        CampaignConfig {
            ensemble_count: 3,
            asha: AshaConfig { grace_period: 1, max_resource: 4, num_trials: 1, ..Default::default() },
            executor: ExecutorSection {
                kind: ExecutorKind::Logistic,
                blobs: BlobSpec { n_train: 100, n_val: 100, n_test: 200, ..Default::default() },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn trial() -> TrialConfig {
        TrialConfig { learning_rate: 0.05, ..TrialConfig::TUNED }
    }

    #[test]
    fn parse_and_reject() {
        assert_eq!(parse_steps("tta, ensembling").unwrap(), vec![AblationStep::Tta, AblationStep::Ensembling]);
        assert!(parse_steps("tta,warp-drive").is_err());
        assert!(parse_steps("tta,tta").is_err());
        assert_eq!(parse_steps("").unwrap(), vec![]);
    }

    #[test]
    fn empty_steps_give_baseline_only() {
        let rows = run_ablation(&logistic_config(), &trial(), &[]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].step, "baseline");
    }

    #[test]
    fn full_sequence_has_one_row_per_prefix() {
        let rows = run_ablation(&logistic_config(), &trial(), &AblationStep::ALL).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.metric)));
    }

    #[test]
    fn tta_on_logistic_changes_nothing() {
        let rows = run_ablation(&logistic_config(), &trial(), &[AblationStep::Tta]).unwrap();
        assert_eq!(rows[0].metric, rows[1].metric);
    }

    #[test]
    fn synthetic_only_reacts_to_epochs() {
        let c = CampaignConfig { asha: AshaConfig { grace_period: 1, max_resource: 20, num_trials: 1, ..Default::default() }, ..Default::default() };
        let rows = run_ablation(&c, &TrialConfig::TUNED, &[AblationStep::CombinedSplit, AblationStep::DoubledEpochs]).unwrap();
        assert_eq!(rows[0].metric, rows[1].metric);
        assert!(rows[2].metric > rows[1].metric);
    }
}
