use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use tuneflow::asha::{AshaConfig, TrialId};
use tuneflow::augment::ImageBuffer;
use tuneflow::executor::protocol::{decode_line, encode};
use tuneflow::executor::worker::toy_logits;
use tuneflow::executor::{
    Action, ExecError, ExternalExecutor, FromWorker, Phase, SessionEvent, StartTrial, SyntheticObjective, ToWorker,
    TrialExecutor, Transport,
};
use tuneflow::hyperspace::TrialConfig;
use tuneflow::orchestrator::{run_campaign, CampaignSettings, Driver, EventLog};

const BIN: &str = env!("CARGO_BIN_EXE_tuneflow");

fn command(extra: &[&str]) -> Transport {
    let mut args = vec!["worker".to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    Transport::Command { program: BIN.into(), args }
}

fn start(trial: u32, max_epochs: u32) -> StartTrial {
    StartTrial { trial_id: TrialId(trial), config: TrialConfig::TUNED, max_epochs, seed: 77, phase: Phase::Tune }
}

#[test]
fn raw_lines_through_subprocess() {
    let mut child = Command::new(BIN).arg("worker").stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    let mut recv = || {
        let mut line = String::new();
        stdout.read_line(&mut line).unwrap();
        decode_line::<FromWorker>(&line).unwrap()
    };
    let s = start(5, 3);
    let msg = ToWorker::Start { trial_id: s.trial_id, config: s.config, max_epochs: 3, seed: 77, phase: None };
    writeln!(stdin, "{}", encode(&msg).unwrap()).unwrap();
    let objective = SyntheticObjective::new(77);
    for epoch in 1..=2 {
        match recv() {
            FromWorker::Result { trial_id, epoch: e, metric } => {
                assert_eq!((trial_id, e), (TrialId(5), epoch));
                assert_eq!(metric, objective.metric(&TrialConfig::TUNED, TrialId(5), epoch));
            }
            other => panic!("{other:?}"),
        }
        let action = if epoch == 2 { Action::Stop } else { Action::Continue };
        writeln!(stdin, "{}", encode(&ToWorker::Decision { trial_id: TrialId(5), action }).unwrap()).unwrap();
    }
    assert!(matches!(recv(), FromWorker::Done { trial_id: TrialId(5), .. }));
    drop(stdin);
    assert!(child.wait().unwrap().success());
}

#[test]
fn session_over_subprocess() {
    let executor = ExternalExecutor::new(command(&[]));
    let mut session = executor.start(&start(1, 4)).unwrap();
    let mut epochs = 0;
    while let SessionEvent::Result(r) = session.next_event().unwrap() {
        epochs = r.epoch;
        session.send_decision(Action::Continue).unwrap();
    }
    assert_eq!(epochs, 4);
}

#[test]
fn campaign_over_subprocesses() {
    let asha = AshaConfig { grace_period: 1, reduction_factor: 2, max_resource: 8, num_trials: 8, ..Default::default() };
    let settings = CampaignSettings { parallelism: 3, driver: Driver::Threaded, ..CampaignSettings::new(4, asha) };
    let mut log = EventLog::in_memory();
    let out = run_campaign(&settings, &ExternalExecutor::new(command(&["--fail-trials", "2"])), &mut log).unwrap();
    assert_eq!(out.configs.len(), 8);
    assert_ne!(out.best.trial_id, TrialId(2));
    assert!(log.events().iter().any(|e| e.payload.kind() == "trial_failed"));
}

#[test]
fn silent_worker_times_out() {
    let executor =
        ExternalExecutor::new(command(&["--epoch-delay-ms", "2000"])).with_epoch_timeout(Duration::from_millis(100));
    let mut session = executor.start(&start(9, 3)).unwrap();
    let err = session.next_event().unwrap_err();
    assert!(matches!(err, ExecError::Timeout(TrialId(9))), "{err}");
}

#[test]
fn worker_error_surfaces() {
    let executor = ExternalExecutor::new(command(&["--fail-trials", "3"]));
    let mut session = executor.start(&start(3, 3)).unwrap();
    let err = session.next_event().unwrap_err();
    assert!(matches!(err, ExecError::Worker { trial: TrialId(3), .. }), "{err}");
}

#[test]
fn score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let images = [
        ImageBuffer::filled(20, 30, [255, 0, 51]),
        ImageBuffer::from_fn(16, 16, |y, x| [(x * 16) as u8, (y * 16) as u8, 7]),
    ];
    let mut paths = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let p = dir.path().join(format!("{i}.png"));
        img.save_png(&p).unwrap();
        paths.push(p.to_string_lossy().into_owned());
    }
    let executor = ExternalExecutor::new(command(&[]));
    let logits = executor.score(11, paths).unwrap();
    assert_eq!(logits.len(), 2);
    assert_eq!(logits[0], vec![4.0, 0.0, 0.8]);
    assert_eq!(logits[1], toy_logits(&images[1]));
}

#[test]
fn score_missing_file_is_an_error() {
    let executor = ExternalExecutor::new(command(&[]));
    assert!(executor.score(1, vec!["/nonexistent/x.png".into()]).is_err());
}
