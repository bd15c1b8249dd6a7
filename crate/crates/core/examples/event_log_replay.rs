//! Writes a campaign log to disk, reads it back and rebuilds the scheduler
//! state from it.

use tuneflow::asha::AshaConfig;
use tuneflow::executor::SyntheticExecutor;
use tuneflow::orchestrator::{read_log, render_report, replay, run_campaign, CampaignSettings, EventLog};

fn main() -> anyhow::Result<()> {
    let path = std::env::temp_dir().join("tuneflow-example").join("events.jsonl");
    let asha = AshaConfig { grace_period: 3, reduction_factor: 3, max_resource: 27, num_trials: 40, ..Default::default() };
    let mut settings = CampaignSettings::new(8, asha);
    settings.parallelism = 3;

    let mut log = EventLog::create(&path)?;
    let live = run_campaign(&settings, &SyntheticExecutor, &mut log)?;
    drop(log);

    let events = read_log(&path)?;
    let replayed = replay(&events)?;
    println!("{} events in {}", events.len(), path.display());
    println!("live best {:?}", live.best);
    println!("replayed best {:?}", replayed.best);
    assert_eq!(replayed.best, Some(live.best));
    assert_eq!(replayed.state, live.state);
    print!("\n{}", render_report(&events, None)?);
    Ok(())
}
