//! ASHA search over the synthetic objective, compared with the known optimum.
//!
//! cargo run --release --example hpo_campaign -- [seed]

use tuneflow::asha::AshaConfig;
use tuneflow::executor::{SyntheticExecutor, SyntheticObjective};
use tuneflow::hyperspace::TrialConfig;
use tuneflow::orchestrator::{run_campaign, CampaignSettings, EventLog};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let asha = AshaConfig { grace_period: 10, reduction_factor: 4, max_resource: 200, num_trials: 200, ..Default::default() };
    let mut settings = CampaignSettings::new(seed, asha);
    settings.parallelism = 4;

    let mut log = EventLog::in_memory();
    let out = run_campaign(&settings, &SyntheticExecutor, &mut log)?;
    let full_budget = asha.num_trials as u64 * asha.max_resource as u64;

    println!("seed {seed}: {} events, {} epochs ({:.1}% of exhaustive)", log.events().len(), out.epochs_used,
        100.0 * out.epochs_used as f64 / full_budget as f64);
    println!("best trial {} metric {:.4} at epoch {}", out.best.trial_id, out.best.metric, out.best.resource);
    let c = out.best_config;
    println!("  lr {:.3e}  wd {:.3e}  N {}  M {}  batch {}", c.learning_rate, c.weight_decay, c.randaugment_n, c.randaugment_m, c.batch_size);
    println!("plateau {:.4} vs tuned point {:.4}", SyntheticObjective::plateau(&c), SyntheticObjective::plateau(&TrialConfig::TUNED));
    Ok(())
}
