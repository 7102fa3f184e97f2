//! Black boxes served by a child process over newline-delimited JSON.
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"ready","p":10,"name":"f1"}
//! -> {"type":"predict","id":0,"inputs":[[...],...]}
//! <- {"type":"outputs","id":0,"outputs":[...]}
//! -> {"type":"bye"}
//! ```

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use glider_core::{BlackBox, Matrix, QueryError};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_BATCH_ROWS: usize = 1000;
pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request<'a> {
    Hello { version: u32 },
    Predict { id: u64, inputs: Vec<&'a [f64]> },
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ready { p: i64, name: String },
    /// `null` entries stand for values JSON cannot carry (NaN, ±Inf).
    Outputs { id: u64, outputs: Vec<Option<f64>> },
    Error { message: String },
}

/// How to start an adapter process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchSpec {
    /// Shell command line, run with `sh -c`.
    pub command: String,
    pub cwd: Option<PathBuf>,
    #[serde(with = "millis")]
    pub handshake_timeout: Duration,
    /// Per-request reply timeout; `None` waits indefinitely.
    #[serde(with = "opt_millis")]
    pub request_timeout: Option<Duration>,
    pub batch_rows: usize,
}

impl LaunchSpec {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            cwd: None,
            handshake_timeout: DEFAULT_HANDSHAKE_TIMEOUT,
            request_timeout: None,
            batch_rows: DEFAULT_BATCH_ROWS,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

mod opt_millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&(d.as_millis() as u64)),
            None => s.serialize_none(),
        }
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Option::<u64>::deserialize(d).map(|o| o.map(Duration::from_millis))
    }
}

/// A live adapter process. One request is in flight at a time; open several
/// handles for parallel querying.
#[derive(Debug)]
pub struct ExternalModel {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<std::io::Result<String>>,
    arity: usize,
    name: String,
    next_id: u64,
    spec: LaunchSpec,
}

enum WaitError {
    Timeout,
    Closed,
    Io(String),
}

impl ExternalModel {
    /// Starts the adapter and completes the handshake.
    pub fn connect(spec: &LaunchSpec) -> Result<Self, QueryError> {
        if spec.batch_rows == 0 {
            return Err(QueryError::Launch("batch size must be at least 1 row".into()));
        }
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(&spec.command).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::inherit());
        if let Some(dir) = &spec.cwd {
            cmd.current_dir(dir);
        }
        let mut child = cmd.spawn().map_err(|e| QueryError::Launch(format!("{}: {e}", spec.command)))?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut model =
            Self { child, stdin, lines: rx, arity: 0, name: String::new(), next_id: 0, spec: spec.clone() };
        model.handshake()?;
        Ok(model)
    }

    fn handshake(&mut self) -> Result<(), QueryError> {
        let timeout = self.spec.handshake_timeout;
        // A child that dies right away may already have closed stdin.
        if self.send(&Request::Hello { version: PROTOCOL_VERSION }).is_err() {
            return Err(QueryError::Launch(format!("adapter exited before handshake ({})", self.exit_status())));
        }
        let line = match self.next_line(Some(timeout)) {
            Ok(l) => l,
            Err(WaitError::Timeout) => {
                let _ = self.child.kill();
                let _ = self.child.wait();
                return Err(QueryError::Timeout(timeout.as_millis() as u64));
            }
            Err(WaitError::Closed) => {
                return Err(QueryError::Launch(format!("adapter exited before handshake ({})", self.exit_status())))
            }
            Err(WaitError::Io(e)) => return Err(QueryError::Io(e)),
        };
        match parse_reply(&line)? {
            Reply::Ready { p, name } => {
                if p <= 0 {
                    return Err(QueryError::InvalidSchema(format!("adapter advertised p = {p}")));
                }
                self.arity = p as usize;
                self.name = name;
                Ok(())
            }
            Reply::Error { message } => Err(QueryError::Launch(format!("adapter refused handshake: {message}"))),
            other => Err(QueryError::Protocol { message: format!("expected ready, got {other:?}") }),
        }
    }

    fn send(&mut self, req: &Request<'_>) -> Result<(), QueryError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| QueryError::Io("adapter stdin closed".into()))?;
        let mut line = serde_json::to_string(req).map_err(|e| QueryError::Protocol { message: e.to_string() })?;
        line.push('\n');
        stdin.write_all(line.as_bytes()).and_then(|()| stdin.flush()).map_err(|e| QueryError::Io(e.to_string()))
    }

    fn next_line(&mut self, timeout: Option<Duration>) -> Result<String, WaitError> {
        let deadline = timeout.map(|t| Instant::now() + t);
        loop {
            let got = match deadline {
                Some(d) => self.lines.recv_timeout(d.saturating_duration_since(Instant::now())).map_err(|e| match e {
                    RecvTimeoutError::Timeout => WaitError::Timeout,
                    RecvTimeoutError::Disconnected => WaitError::Closed,
                }),
                None => self.lines.recv().map_err(|_| WaitError::Closed),
            }?;
            match got {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Ok(line),
                Err(e) => return Err(WaitError::Io(e.to_string())),
            }
        }
    }

    fn exit_status(&mut self) -> String {
        let deadline = Instant::now() + SHUTDOWN_GRACE;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return status.to_string(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                Ok(None) => return "still running".into(),
                Err(e) => return e.to_string(),
            }
        }
    }

    pub fn launch_spec(&self) -> &LaunchSpec {
        &self.spec
    }

    fn request(&mut self, rows: &[&[f64]], offset: usize) -> Result<Vec<f64>, QueryError> {
        let id = self.next_id;
        self.next_id += 1;
        self.send(&Request::Predict { id, inputs: rows.to_vec() })?;
        let line = match self.next_line(self.spec.request_timeout) {
            Ok(l) => l,
            Err(WaitError::Timeout) => {
                return Err(QueryError::Protocol { message: format!("no reply to request {id} in time") })
            }
            Err(WaitError::Closed) => return Err(QueryError::Exited { status: self.exit_status() }),
            Err(WaitError::Io(e)) => return Err(QueryError::Io(e)),
        };
        match parse_reply(&line)? {
            Reply::Outputs { id: got, outputs } => {
                if got != id {
                    return Err(QueryError::Protocol { message: format!("reply id {got} does not match request id {id}") });
                }
                if outputs.len() != rows.len() {
                    return Err(QueryError::Length { expected: rows.len(), got: outputs.len() });
                }
                outputs
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| v.filter(|v| v.is_finite()).ok_or(QueryError::NonFinite { index: offset + i }))
                    .collect()
            }
            Reply::Error { message } => Err(QueryError::Protocol { message: format!("adapter error: {message}") }),
            other => Err(QueryError::Protocol { message: format!("expected outputs, got {other:?}") }),
        }
    }

    /// Sends `bye` and waits for the adapter to exit.
    pub fn shutdown(mut self) -> Result<ExitStatus, QueryError> {
        self.close()
    }

    fn close(&mut self) -> Result<ExitStatus, QueryError> {
        if self.stdin.is_some() {
            let _ = self.send(&Request::Bye);
            self.stdin = None;
        }
        let deadline = Instant::now() + SHUTDOWN_GRACE;
        loop {
            match self.child.try_wait().map_err(|e| QueryError::Io(e.to_string()))? {
                Some(status) => return Ok(status),
                None if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                None => {
                    let _ = self.child.kill();
                    return self.child.wait().map_err(|e| QueryError::Io(e.to_string()));
                }
            }
        }
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

fn parse_reply(line: &str) -> Result<Reply, QueryError> {
    serde_json::from_str(line).map_err(|e| QueryError::Protocol { message: format!("malformed reply ({e}): {line}") })
}

impl BlackBox for ExternalModel {
    fn arity(&self) -> usize {
        self.arity
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn predict_raw(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError> {
        if let Some(pos) = inputs.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(QueryError::Protocol {
                message: format!("input row {} holds a non-finite value", pos / inputs.cols().max(1)),
            });
        }
        let rows: Vec<&[f64]> = inputs.iter_rows().collect();
        let mut out = Vec::with_capacity(rows.len());
        for (c, chunk) in rows.chunks(self.spec.batch_rows).enumerate() {
            out.extend(self.request(chunk, c * self.spec.batch_rows)?);
        }
        Ok(out)
    }
}
