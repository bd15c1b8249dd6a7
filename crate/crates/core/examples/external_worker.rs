//! A campaign driven over the worker wire protocol. The synthetic worker runs
//! on a local TCP port in this process; trial 3 is set up to fail.

use std::collections::BTreeSet;
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use tuneflow::asha::AshaConfig;
use tuneflow::executor::worker::{serve_tcp, WorkerOptions};
use tuneflow::executor::{ExternalExecutor, Transport};
use tuneflow::orchestrator::{run_campaign, CampaignSettings, Driver, EventLog, EventPayload};

fn main() -> anyhow::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let address = listener.local_addr()?.to_string();
    let opts = WorkerOptions { fail_trials: BTreeSet::from([3]), epoch_delay: Duration::from_millis(1) };
    thread::spawn(move || serve_tcp(listener, opts));

    let executor = ExternalExecutor::new(Transport::Tcp { address: address.clone() }).with_epoch_timeout(Duration::from_secs(10));
    let asha = AshaConfig { grace_period: 2, reduction_factor: 3, max_resource: 18, num_trials: 16, ..Default::default() };
    let mut settings = CampaignSettings::new(21, asha);
    settings.parallelism = 4;
    settings.driver = Driver::Threaded;

    let mut log = EventLog::in_memory();
    let out = run_campaign(&settings, &executor, &mut log)?;
    println!("worker at {address}");
    for e in log.events() {
        if let EventPayload::TrialFailed { trial_id, epochs, reason } = &e.payload {
            println!("{trial_id} failed after {epochs} epochs: {reason}");
        }
    }
    println!("best {} metric {:.4} at epoch {}, {} epochs trained", out.best.trial_id, out.best.metric, out.best.resource, out.epochs_used);
    Ok(())
}
