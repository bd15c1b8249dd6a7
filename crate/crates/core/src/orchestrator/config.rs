use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::asha::AshaConfig;
use crate::executor::{
    BlobData, BlobSpec, ExternalExecutor, FeatureMap, LogisticExecutor, SyntheticExecutor, Transport, TrialExecutor,
};
use crate::hyperspace::SearchSpace;
use crate::seed::{derive, Stream};

use super::campaign::{CampaignSettings, Driver};
use super::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorKind {
    #[default]
    Synthetic,
    Logistic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorSection {
    pub kind: ExecutorKind,
    /// Required for `external`.
    pub transport: Option<Transport>,
    pub epoch_timeout_secs: u64,
    pub blobs: BlobSpec,
    pub features: FeatureMap,
}

impl Default for ExecutorSection {
    fn default() -> Self {
        ExecutorSection {
            kind: ExecutorKind::Synthetic,
            transport: None,
            epoch_timeout_secs: 600,
            blobs: BlobSpec::default(),
            features: FeatureMap::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Directory for every artifact of a run.
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/events.jsonl`.
    pub event_log: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection { out_dir: PathBuf::from("runs"), event_log: None }
    }
}

/// Everything a campaign needs, loadable from TOML:
///
/// ```toml
/// seed = 7
/// parallelism = 4
///
/// [asha]
/// grace_period = 10
/// reduction_factor = 4
/// max_resource = 200
/// num_trials = 200
///
/// [executor]
/// kind = "synthetic"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub parallelism: usize,
    pub final_epochs_multiplier: u32,
    pub ensemble_count: u32,
    pub search_space: SearchSpace,
    pub asha: AshaConfig,
    pub executor: ExecutorSection,
    pub paths: PathsSection,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 0,
            parallelism: 1,
            final_epochs_multiplier: 2,
            ensemble_count: 20,
            search_space: SearchSpace::default(),
            asha: AshaConfig::default(),
            executor: ExecutorSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, OrchestratorError> {
        let config: CampaignConfig = toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Config(m.to_string()));
        if self.parallelism < 1 {
            return bad("parallelism must be at least 1");
        }
        if self.final_epochs_multiplier < 1 {
            return bad("final_epochs_multiplier must be at least 1");
        }
        if self.ensemble_count < 1 {
            return bad("ensemble_count must be at least 1");
        }
        if self.executor.kind == ExecutorKind::External && self.executor.transport.is_none() {
            return bad("external executor needs [executor.transport]");
        }
        self.asha.validate().map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    pub fn event_log_path(&self) -> PathBuf {
        self.paths.event_log.clone().unwrap_or_else(|| self.paths.out_dir.join("events.jsonl"))
    }

    pub fn final_epochs(&self) -> u32 {
        self.asha.max_resource * self.final_epochs_multiplier
    }

    pub fn settings(&self) -> CampaignSettings {
        CampaignSettings {
            seed: self.seed,
            search_space: self.search_space.clone(),
            asha: self.asha,
            parallelism: self.parallelism,
            driver: match self.executor.kind {
                ExecutorKind::External => Driver::Threaded,
                _ => Driver::Lockstep,
            },
        }
    }

    /// Blob data for the logistic executor, seeded from the campaign seed.
    pub fn blob_data(&self) -> BlobData {
        BlobData::generate(self.executor.blobs, derive(self.seed, Stream::Data, 0))
    }

    pub fn build_executor(&self) -> Result<Box<dyn TrialExecutor>, OrchestratorError> {
        Ok(match self.executor.kind {
            ExecutorKind::Synthetic => Box::new(SyntheticExecutor),
            ExecutorKind::Logistic => {
                Box::new(LogisticExecutor::new(self.blob_data()).with_features(self.executor.features))
            }
            ExecutorKind::External => Box::new(self.external_executor()?),
        })
    }

    pub fn external_executor(&self) -> Result<ExternalExecutor, OrchestratorError> {
        let transport = self
            .executor
            .transport
            .clone()
            .ok_or_else(|| OrchestratorError::Config("no [executor.transport] configured".into()))?;
        Ok(ExternalExecutor::new(transport).with_epoch_timeout(Duration::from_secs(self.executor.epoch_timeout_secs)))
    }
}
