use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::asha::{TrialId, TrialStatus};
use crate::hyperspace::TrialConfig;

use super::events::{replay, BestTrial, CampaignEvent, EventPayload};
use super::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RungSummary {
    pub resource: u32,
    pub recorded: usize,
    /// Trials the scheduler let past this rung.
    pub survivors: usize,
    /// `ceil(recorded / η)`.
    pub bound: usize,
}

impl RungSummary {
    pub fn within_bound(&self) -> bool {
        self.survivors <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationStats {
    pub trials: usize,
    pub mean_epochs: f64,
    pub max_epochs: u32,
    pub mean_ms: f64,
    pub max_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CampaignSummary {
    pub counts: BTreeMap<&'static str, usize>,
    pub best: Option<(BestTrial, TrialConfig)>,
    pub rungs: Vec<RungSummary>,
    pub durations: Option<DurationStats>,
    pub finished: bool,
}

impl CampaignSummary {
    pub fn trials(&self) -> usize {
        self.counts.values().sum()
    }
}

fn status_name(s: TrialStatus) -> &'static str {
    match s {
        TrialStatus::Running => "running",
        TrialStatus::Stopped => "stopped",
        TrialStatus::Completed => "completed",
        TrialStatus::Failed => "failed",
    }
}

/// Rebuilds the campaign from its log and condenses it.
pub fn summarize(events: &[CampaignEvent]) -> Result<CampaignSummary, OrchestratorError> {
    if !events.iter().any(|e| matches!(e.payload, EventPayload::TrialSampled { .. })) {
        return Ok(CampaignSummary::default());
    }
    let replayed = replay(events)?;
    let state = &replayed.state;
    let mut counts = BTreeMap::new();
    for s in state.trial_status().values() {
        *counts.entry(status_name(*s)).or_insert(0) += 1;
    }
    let rungs = state
        .rungs()
        .iter()
        .filter(|(_, entries)| !entries.is_empty())
        .map(|(&resource, entries)| RungSummary {
            resource,
            recorded: entries.len(),
            survivors: state.survivors(resource).len(),
            bound: state.config().keep_count(entries.len()),
        })
        .collect();

    let mut started: BTreeMap<TrialId, u64> = BTreeMap::new();
    let mut spans: Vec<(u32, u64)> = Vec::new();
    for e in events {
        match &e.payload {
            EventPayload::TrialStarted { trial_id } => {
                started.insert(*trial_id, e.timestamp);
            }
            EventPayload::TrialDone { trial_id, epochs, .. } | EventPayload::TrialFailed { trial_id, epochs, .. } => {
                if let Some(t0) = started.remove(trial_id) {
                    spans.push((*epochs, e.timestamp.saturating_sub(t0)));
                }
            }
            _ => {}
        }
    }
    let durations = (!spans.is_empty()).then(|| {
        let n = spans.len() as f64;
        DurationStats {
            trials: spans.len(),
            mean_epochs: spans.iter().map(|s| s.0 as f64).sum::<f64>() / n,
            max_epochs: spans.iter().map(|s| s.0).max().unwrap_or(0),
            mean_ms: spans.iter().map(|s| s.1 as f64).sum::<f64>() / n,
            max_ms: spans.iter().map(|s| s.1).max().unwrap_or(0),
        }
    });
    let best = replayed.best.and_then(|b| replayed.configs.get(&b.trial_id).map(|c| (b, *c)));
    Ok(CampaignSummary { counts, best, rungs, durations, finished: replayed.finished })
}

impl fmt::Display for CampaignSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.trials() == 0 {
            return writeln!(f, "no trials");
        }
        let counts: Vec<String> = self.counts.iter().map(|(k, v)| format!("{v} {k}")).collect();
        writeln!(f, "trials: {} ({})", self.trials(), counts.join(", "))?;
        if !self.finished {
            writeln!(f, "campaign did not finish")?;
        }
        match &self.best {
            Some((best, c)) => {
                writeln!(f, "\nbest trial {} ({:.4} at epoch {})", best.trial_id, best.metric, best.resource)?;
                writeln!(f, "  {:<16}{:.3e}", "learning rate", c.learning_rate)?;
                writeln!(f, "  {:<16}{:.3e}", "weight decay", c.weight_decay)?;
                writeln!(f, "  {:<16}{}", "RandAugment N", c.randaugment_n)?;
                writeln!(f, "  {:<16}{}", "RandAugment M", c.randaugment_m)?;
                writeln!(f, "  {:<16}{}", "batch size", c.batch_size)?;
            }
            None => writeln!(f, "\nno best trial")?,
        }
        writeln!(f, "\n{:>8} {:>9} {:>10} {:>6}", "rung", "recorded", "survivors", "bound")?;
        for r in &self.rungs {
            let flag = if r.within_bound() { "" } else { "  above ceil(n/eta): early promotions" };
            writeln!(f, "{:>8} {:>9} {:>10} {:>6}{flag}", r.resource, r.recorded, r.survivors, r.bound)?;
        }
        if let Some(d) = &self.durations {
            writeln!(
                f,
                "\ndurations over {} trials: mean {:.1} epochs (max {}), mean {:.0} ms (max {} ms)",
                d.trials, d.mean_epochs, d.max_epochs, d.mean_ms, d.max_ms
            )?;
        }
        Ok(())
    }
}

/// Text report of a log, with an ensemble curve CSV appended when given.
pub fn render_report(events: &[CampaignEvent], curve_csv: Option<&str>) -> Result<String, OrchestratorError> {
    let mut out = summarize(events)?.to_string();
    if let Some(csv) = curve_csv {
        let _ = write!(out, "\nensemble curve\n{csv}");
    }
    Ok(out)
}
