//! Feeding results to the scheduler by hand. Nine trials report at each rung
//! in turn; metrics are made up so the ranking is easy to follow.

use tuneflow::asha::{AshaConfig, AshaState, Decision, TrialId};

fn main() -> anyhow::Result<()> {
    let config = AshaConfig { grace_period: 1, reduction_factor: 3, max_resource: 9, num_trials: 9, ..Default::default() };
    let mut asha = AshaState::new(config)?;
    println!("rungs {:?}", config.rung_levels());

    let quality = [0.31, 0.72, 0.55, 0.18, 0.90, 0.47, 0.66, 0.12, 0.80];
    let ids: Vec<TrialId> = (0..9).map(TrialId).collect();
    for &id in &ids {
        asha.register(id)?;
    }
    let mut alive = ids.clone();
    for epoch in 1..=config.max_resource {
        let mut next = Vec::new();
        for &id in &alive {
            let metric = quality[id.0 as usize] * (1.0 - (-(epoch as f64) / 3.0).exp());
            let decision = asha.record_and_decide(id, epoch, metric)?;
            if config.rung_levels().contains(&epoch) {
                println!("epoch {epoch} {id} {metric:.3} -> {decision:?}");
            }
            if decision == Decision::Continue {
                next.push(id);
            }
        }
        alive = next;
    }
    let (best, metric, resource) = asha.best_trial()?;
    println!("best {best} with {metric:.3} at {resource}");
    for (resource, entries) in asha.rungs() {
        let (n, kept) = (entries.len(), asha.survivors(*resource).len());
        println!("rung {resource}: {n} recorded, {kept} survived, ceil(n/eta) = {}", config.keep_count(n));
    }
    Ok(())
}
