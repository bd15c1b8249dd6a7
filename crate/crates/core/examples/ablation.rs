//! Cumulative ablation of the final-training additions on the logistic task.

use tuneflow::asha::AshaConfig;
use tuneflow::executor::BlobSpec;
use tuneflow::hyperspace::TrialConfig;
use tuneflow::orchestrator::{run_ablation, AblationStep, CampaignConfig, ExecutorKind, ExecutorSection};

fn main() -> anyhow::Result<()> {
    let config = CampaignConfig {
        seed: 5,
        ensemble_count: 8,
        asha: AshaConfig { grace_period: 1, max_resource: 10, num_trials: 1, ..Default::default() },
        executor: ExecutorSection {
            kind: ExecutorKind::Logistic,
            blobs: BlobSpec { separation: 1.2, n_train: 80, n_val: 80, ..Default::default() },
            ..Default::default()
        },
        ..Default::default()
    };
    let trial = TrialConfig { learning_rate: 0.05, batch_size: 16, ..TrialConfig::TUNED };
    let rows = run_ablation(&config, &trial, &AblationStep::ALL)?;
    let mut previous = None;
    for r in rows {
        let delta = previous.map(|p: f64| format!("{:+.4}", r.metric - p)).unwrap_or_default();
        println!("{:<16} {:.4} {delta}", r.step, r.metric);
        previous = Some(r.metric);
    }
    Ok(())
}
