use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::asha::TrialId;

use super::protocol::{read_message, write_message, Action, FromWorker, ProtocolError, ToWorker};
use super::{EpochResult, ExecError, Phase, SessionEvent, StartTrial, TrialExecutor, TrialSession};

pub const DEFAULT_EPOCH_TIMEOUT: Duration = Duration::from_secs(600);

/// How a worker is reached. Every trial gets its own process or connection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Transport {
    Command {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
    Tcp {
        address: String,
    },
}

struct Channel {
    writer: Box<dyn Write + Send>,
    incoming: Receiver<Result<FromWorker, ProtocolError>>,
    child: Option<Child>,
}

impl Drop for Channel {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn spawn_reader<R: BufRead + Send + 'static>(mut reader: R) -> Receiver<Result<FromWorker, ProtocolError>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || loop {
        let msg = match read_message::<FromWorker, _>(&mut reader) {
            Ok(Some(m)) => Ok(m),
            Ok(None) => Err(ProtocolError::Closed),
            Err(e) => Err(e),
        };
        let last = msg.is_err();
        if tx.send(msg).is_err() || last {
            return;
        }
    });
    rx
}

impl Transport {
    fn open(&self) -> Result<Channel, ExecError> {
        match self {
            Transport::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Channel { writer: Box::new(stdin), incoming: spawn_reader(BufReader::new(stdout)), child: Some(child) })
            }
            Transport::Tcp { address } => {
                let stream = TcpStream::connect(address)?;
                stream.set_nodelay(true)?;
                let reader = BufReader::new(stream.try_clone()?);
                Ok(Channel { writer: Box::new(stream), incoming: spawn_reader(reader), child: None })
            }
        }
    }
}

/// Runs trials in worker processes speaking the JSON-lines protocol.
#[derive(Debug, Clone)]
pub struct ExternalExecutor {
    transport: Transport,
    epoch_timeout: Duration,
}

impl ExternalExecutor {
    pub fn new(transport: Transport) -> Self {
        ExternalExecutor { transport, epoch_timeout: DEFAULT_EPOCH_TIMEOUT }
    }

    pub fn with_epoch_timeout(mut self, timeout: Duration) -> Self {
        self.epoch_timeout = timeout;
        self
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    /// Sends a batch of image paths to a scoring worker and waits for one
    /// logit vector per path.
    pub fn score(&self, request_id: u64, paths: Vec<String>) -> Result<Vec<Vec<f64>>, ExecError> {
        let expected = paths.len();
        let mut channel = self.transport.open()?;
        write_message(&mut channel.writer, &ToWorker::Score { request_id, paths })?;
        match channel.incoming.recv_timeout(self.epoch_timeout) {
            Ok(Ok(FromWorker::Logits { request_id: r, logits })) if r == request_id && logits.len() == expected => {
                Ok(logits)
            }
            Ok(Ok(other)) => Err(ProtocolError::Unexpected(format!("{other:?}")).into()),
            Ok(Err(e)) => Err(e.into()),
            Err(_) => Err(ExecError::Other(format!("scoring request {request_id} timed out"))),
        }
    }
}

impl TrialExecutor for ExternalExecutor {
    fn start(&self, start: &StartTrial) -> Result<Box<dyn TrialSession>, ExecError> {
        let mut channel = self.transport.open()?;
        let phase = (start.phase != Phase::Tune).then_some(start.phase);
        write_message(
            &mut channel.writer,
            &ToWorker::Start {
                trial_id: start.trial_id,
                config: start.config,
                max_epochs: start.max_epochs,
                seed: start.seed,
                phase,
            },
        )?;
        Ok(Box::new(ExternalSession {
            trial_id: start.trial_id,
            max_epochs: start.max_epochs,
            timeout: self.epoch_timeout,
            channel,
            last_epoch: 0,
            awaiting: false,
            stopped_at: None,
            finished: None,
        }))
    }
}

struct ExternalSession {
    trial_id: TrialId,
    max_epochs: u32,
    timeout: Duration,
    channel: Channel,
    last_epoch: u32,
    awaiting: bool,
    stopped_at: Option<u32>,
    finished: Option<f64>,
}

impl ExternalSession {
    fn receive(&mut self) -> Result<FromWorker, ExecError> {
        match self.channel.incoming.recv_timeout(self.timeout) {
            Ok(Ok(msg)) => Ok(msg),
            Ok(Err(e)) => Err(e.into()),
            Err(RecvTimeoutError::Timeout) => Err(ExecError::Timeout(self.trial_id)),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed.into()),
        }
    }

    fn check_trial(&self, got: TrialId) -> Result<(), ExecError> {
        if got != self.trial_id {
            return Err(ProtocolError::Unexpected(format!("message for trial {got} on session of {}", self.trial_id)).into());
        }
        Ok(())
    }
}

impl TrialSession for ExternalSession {
    fn next_event(&mut self) -> Result<SessionEvent, ExecError> {
        if let Some(final_metric) = self.finished {
            return Ok(SessionEvent::Done { final_metric });
        }
        if self.awaiting {
            return Err(ExecError::Other(format!("trial {}: decision pending", self.trial_id)));
        }
        loop {
            match self.receive()? {
                FromWorker::Result { trial_id, epoch, metric } => {
                    self.check_trial(trial_id)?;
                    if epoch <= self.last_epoch || epoch > self.max_epochs {
                        return Err(ProtocolError::EpochOrder { trial: trial_id, epoch, previous: self.last_epoch }.into());
                    }
                    self.last_epoch = epoch;
                    if let Some(stop) = self.stopped_at {
                        // one in-flight epoch may finish after a stop
                        if epoch > stop + 1 {
                            return Err(ProtocolError::Unexpected(format!(
                                "trial {trial_id}: result for epoch {epoch} after stop at {stop}"
                            ))
                            .into());
                        }
                        continue;
                    }
                    self.awaiting = true;
                    return Ok(SessionEvent::Result(EpochResult { trial_id, epoch, metric }));
                }
                FromWorker::Done { trial_id, final_metric } => {
                    self.check_trial(trial_id)?;
                    self.finished = Some(final_metric);
                    return Ok(SessionEvent::Done { final_metric });
                }
                FromWorker::Error { trial_id, message } => {
                    self.check_trial(trial_id)?;
                    return Err(ExecError::Worker { trial: trial_id, message });
                }
                other @ FromWorker::Logits { .. } => {
                    return Err(ProtocolError::Unexpected(format!("{other:?}")).into());
                }
            }
        }
    }

    fn send_decision(&mut self, action: Action) -> Result<(), ExecError> {
        if !self.awaiting {
            return Err(ExecError::Finished(self.trial_id));
        }
        self.awaiting = false;
        if action == Action::Stop {
            self.stopped_at = Some(self.last_epoch);
        }
        write_message(&mut self.channel.writer, &ToWorker::Decision { trial_id: self.trial_id, action })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::TrialConfig;
    use std::net::TcpListener;

    /// Serves one connection with a scripted list of worker lines, sent after
    /// the start message arrives and each decision.
    fn scripted(lines: Vec<&'static str>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut writer = stream;
            let mut buf = String::new();
            reader.read_line(&mut buf).unwrap();
            for l in lines {
                writeln!(writer, "{l}").unwrap();
            }
            // keep the socket open until the client hangs up
            buf.clear();
            while reader.read_line(&mut buf).map(|n| n > 0).unwrap_or(false) {
                buf.clear();
            }
        });
        addr
    }

    fn start() -> StartTrial {
        StartTrial { trial_id: TrialId(1), config: TrialConfig::TUNED, max_epochs: 5, seed: 0, phase: Phase::Tune }
    }

    #[test]
    fn non_monotonic_epoch_is_protocol_error() {
        let addr = scripted(vec![
            r#"{"type":"result","trial_id":1,"epoch":2,"metric":0.1}"#,
            r#"{"type":"result","trial_id":1,"epoch":2,"metric":0.2}"#,
        ]);
        let exec = ExternalExecutor::new(Transport::Tcp { address: addr });
        let mut s = exec.start(&start()).unwrap();
        assert!(matches!(s.next_event().unwrap(), SessionEvent::Result(_)));
        s.send_decision(Action::Continue).unwrap();
        assert!(matches!(s.next_event(), Err(ExecError::Protocol(ProtocolError::EpochOrder { .. }))));
    }

    #[test]
    fn malformed_line_is_protocol_error() {
        let addr = scripted(vec!["not json"]);
        let exec = ExternalExecutor::new(Transport::Tcp { address: addr });
        let mut s = exec.start(&start()).unwrap();
        assert!(matches!(s.next_event(), Err(ExecError::Protocol(ProtocolError::Malformed(_)))));
    }

    #[test]
    fn silence_times_out() {
        let addr = scripted(vec![]);
        let exec = ExternalExecutor::new(Transport::Tcp { address: addr }).with_epoch_timeout(Duration::from_millis(50));
        let mut s = exec.start(&start()).unwrap();
        assert!(matches!(s.next_event(), Err(ExecError::Timeout(TrialId(1)))));
    }

    #[test]
    fn worker_error_surfaces() {
        let addr = scripted(vec![r#"{"type":"error","trial_id":1,"message":"dataset missing"}"#]);
        let exec = ExternalExecutor::new(Transport::Tcp { address: addr });
        let mut s = exec.start(&start()).unwrap();
        match s.next_event() {
            Err(ExecError::Worker { message, .. }) => assert_eq!(message, "dataset missing"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn in_flight_result_after_stop_is_tolerated() {
        let addr = scripted(vec![
            r#"{"type":"result","trial_id":1,"epoch":1,"metric":0.1}"#,
            r#"{"type":"result","trial_id":1,"epoch":2,"metric":0.2}"#,
            r#"{"type":"done","trial_id":1,"final_metric":0.2}"#,
        ]);
        let exec = ExternalExecutor::new(Transport::Tcp { address: addr });
        let mut s = exec.start(&start()).unwrap();
        assert!(matches!(s.next_event().unwrap(), SessionEvent::Result(_)));
        s.send_decision(Action::Stop).unwrap();
        assert_eq!(s.next_event().unwrap(), SessionEvent::Done { final_metric: 0.2 });
    }
}
