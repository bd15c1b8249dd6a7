//! Trains an ensemble of logistic models and measures accuracy against
//! ensemble size.

use tuneflow::ensemble::{ensemble_size_curve, write_curve_csv};
use tuneflow::executor::{BlobData, BlobSpec, LogisticExecutor};
use tuneflow::hyperspace::TrialConfig;
use tuneflow::orchestrator::{final_train, FinalSettings};
use tuneflow::seed::{stream_rng, Stream};

fn main() -> anyhow::Result<()> {
    let seed = 3;
    let spec = BlobSpec { separation: 1.0, n_train: 60, n_val: 60, ..Default::default() };
    let executor = LogisticExecutor::new(BlobData::generate(spec, seed));
    let labels = executor.data().test_labels();
    let best = TrialConfig { learning_rate: 0.05, batch_size: 16, ..TrialConfig::TUNED };
    let settings = FinalSettings { seed, epochs: 30, ensemble_count: 12, parallelism: 4 };
    let outcome = final_train(&best, &settings, &executor)?;
    for m in &outcome.members {
        println!("member {:>2}: held-out {:.4}", m.index, m.final_metric);
    }
    let sizes: Vec<usize> = (1..=settings.ensemble_count as usize).collect();
    let curve = ensemble_size_curve(&outcome.predictions(), &labels, &sizes, 20, &mut stream_rng(seed, Stream::EnsembleMember, 99))?;
    write_curve_csv(std::io::stdout().lock(), &curve)?;
    Ok(())
}
