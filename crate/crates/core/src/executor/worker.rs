//! Worker side of the protocol: a synthetic-objective trainer and a toy image
//! scorer. Used by `tuneflow worker`, the examples and the integration tests;
//! real training stacks implement the same messages.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use crate::asha::TrialId;
use crate::augment::ImageBuffer;

use super::protocol::{read_message, write_message, Action, FromWorker, ProtocolError, ToWorker};
use super::SyntheticObjective;

#[derive(Debug, Clone, Default)]
pub struct WorkerOptions {
    /// Trials that answer their start message with an error.
    pub fail_trials: BTreeSet<u32>,
    /// Sleep before each result, to emulate training time.
    pub epoch_delay: Duration,
}

/// Three logits from the mean red, green and blue intensities. Invariant
/// under horizontal flips.
pub fn toy_logits(img: &ImageBuffer) -> Vec<f64> {
    let mut sums = [0.0f64; 3];
    for px in img.data().chunks_exact(3) {
        for c in 0..3 {
            sums[c] += px[c] as f64;
        }
    }
    let n = (img.height() * img.width()).max(1) as f64;
    sums.iter().map(|s| 4.0 * s / n / 255.0).collect()
}

fn score(paths: &[String]) -> Result<Vec<Vec<f64>>, String> {
    paths
        .iter()
        .map(|p| ImageBuffer::open(p).map(|img| toy_logits(&img)).map_err(|e| format!("{p}: {e}")))
        .collect()
}

/// Serves sessions on one stream until it closes. Each `start` runs the
/// synthetic objective in lockstep with the decisions it receives.
pub fn serve<R: BufRead, W: Write>(mut reader: R, mut writer: W, opts: &WorkerOptions) -> Result<(), ProtocolError> {
    while let Some(msg) = read_message::<ToWorker, _>(&mut reader)? {
        match msg {
            ToWorker::Start { trial_id, config, max_epochs, seed, .. } => {
                if opts.fail_trials.contains(&trial_id.0) {
                    let message = "injected failure".to_string();
                    write_message(&mut writer, &FromWorker::Error { trial_id, message })?;
                    continue;
                }
                let objective = SyntheticObjective::new(seed);
                let mut last = 0.0;
                for epoch in 1..=max_epochs {
                    if !opts.epoch_delay.is_zero() {
                        thread::sleep(opts.epoch_delay);
                    }
                    last = objective.metric(&config, trial_id, epoch);
                    write_message(&mut writer, &FromWorker::Result { trial_id, epoch, metric: last })?;
                    match read_message::<ToWorker, _>(&mut reader)? {
                        Some(ToWorker::Decision { trial_id: t, action }) if t == trial_id => {
                            if action == Action::Stop {
                                break;
                            }
                        }
                        Some(other) => return Err(ProtocolError::Unexpected(format!("{other:?}"))),
                        None => return Ok(()),
                    }
                }
                write_message(&mut writer, &FromWorker::Done { trial_id, final_metric: last })?;
            }
            ToWorker::Score { request_id, paths } => match score(&paths) {
                Ok(logits) => write_message(&mut writer, &FromWorker::Logits { request_id, logits })?,
                Err(message) => {
                    let trial_id = TrialId(u32::MAX);
                    write_message(&mut writer, &FromWorker::Error { trial_id, message })?
                }
            },
            other @ ToWorker::Decision { .. } => return Err(ProtocolError::Unexpected(format!("{other:?}"))),
        }
    }
    Ok(())
}

/// Accepts connections forever, one thread each.
pub fn serve_tcp(listener: TcpListener, opts: WorkerOptions) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let opts = opts.clone();
        thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve(reader, stream, &opts);
        });
    }
    Ok(())
}
