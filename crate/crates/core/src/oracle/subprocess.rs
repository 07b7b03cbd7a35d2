//! An oracle served by a child process over standard streams.
//!
//! Protocol, UTF-8, one JSON object per line:
//!
//! ```text
//! child  -> {"n_features": N, "n_classes": C}          (once, on startup)
//! parent -> {"instances": [[x, ...], ...]}             (one line per batch)
//! child  -> {"probs": [[p, ...], ...]}                 (same length and order)
//! ```
//!
//! Numbers sent by the parent carry 17 significant digits.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::Deserialize;

use super::{OracleKind, PredictionOracle};
use crate::data::Instance;
use crate::error::{Error, OracleFailure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct Handshake {
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Deserialize)]
struct Reply {
    probs: Vec<Vec<f64>>,
}

/// Serializes a batch as one request line, without the trailing newline.
pub fn format_request(batch: &[Instance]) -> String {
    let mut s = String::from("{\"instances\":[");
    for (i, x) in batch.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (j, v) in x.values().iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v:.16e}").unwrap();
        }
        s.push(']');
    }
    s.push_str("]}");
    s
}

pub fn parse_handshake(line: &str) -> std::result::Result<Handshake, OracleFailure> {
    serde_json::from_str(line.trim()).map_err(|e| OracleFailure::Malformed {
        reason: format!("bad handshake: {e}"),
        payload: line.to_string(),
    })
}

pub fn parse_reply(line: &str) -> std::result::Result<Vec<Vec<f64>>, OracleFailure> {
    serde_json::from_str::<Reply>(line.trim())
        .map(|r| r.probs)
        .map_err(|e| OracleFailure::Malformed {
            reason: e.to_string(),
            payload: line.to_string(),
        })
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Connection {
    fn close(mut self) {
        drop(self.stdin);
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Round-trip failures worth one restart of the child.
fn is_crash(e: &OracleFailure) -> bool {
    matches!(e, OracleFailure::Exited { .. })
}

pub struct SubprocessOracle {
    command: Vec<String>,
    timeout: Duration,
    shape: Handshake,
    conn: Mutex<Option<Connection>>,
}

impl SubprocessOracle {
    /// Spawns `command` and reads its handshake. When `expected` is given the
    /// declared widths must match it.
    pub fn spawn(command: &[String], timeout_ms: u64, expected: Option<Handshake>) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::invalid("empty oracle command"));
        }
        let timeout = Duration::from_millis(timeout_ms);
        let (conn, shape) = Self::start(command, timeout)?;
        if let Some(exp) = expected {
            if exp != shape {
                conn.close();
                return Err(OracleFailure::Handshake {
                    expected: format!("{exp:?}"),
                    declared: format!("{shape:?}"),
                }
                .into());
            }
        }
        if shape.n_classes < 2 {
            conn.close();
            return Err(OracleFailure::Handshake {
                expected: "n_classes >= 2".into(),
                declared: format!("{shape:?}"),
            }
            .into());
        }
        Ok(Self {
            command: command.to_vec(),
            timeout,
            shape,
            conn: Mutex::new(Some(conn)),
        })
    }

    fn start(command: &[String], timeout: Duration) -> Result<(Connection, Handshake)> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| OracleFailure::Spawn {
                command: command.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut conn = Connection {
            child,
            stdin,
            lines: rx,
        };
        let line = match Self::read_line(&mut conn, timeout) {
            Ok(l) => l,
            Err(e) => {
                conn.close();
                return Err(e.into());
            }
        };
        match parse_handshake(&line) {
            Ok(h) => Ok((conn, h)),
            Err(e) => {
                conn.close();
                Err(e.into())
            }
        }
    }

    fn read_line(
        conn: &mut Connection,
        timeout: Duration,
    ) -> std::result::Result<String, OracleFailure> {
        match conn.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(OracleFailure::Exited {
                detail: format!("read failed: {e}"),
            }),
            Err(RecvTimeoutError::Timeout) => Err(OracleFailure::Timeout {
                timeout_ms: timeout.as_millis() as u64,
            }),
            Err(RecvTimeoutError::Disconnected) => Err(OracleFailure::Exited {
                detail: "end of output".into(),
            }),
        }
    }

    fn round_trip(
        &self,
        conn: &mut Connection,
        request: &str,
    ) -> std::result::Result<Vec<Vec<f64>>, OracleFailure> {
        let written = conn
            .stdin
            .write_all(request.as_bytes())
            .and_then(|_| conn.stdin.write_all(b"\n"))
            .and_then(|_| conn.stdin.flush());
        if let Err(e) = written {
            return Err(OracleFailure::Exited {
                detail: format!("write failed: {e}"),
            });
        }
        let line = Self::read_line(conn, self.timeout)?;
        parse_reply(&line)
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }
}

impl PredictionOracle for SubprocessOracle {
    fn n_features(&self) -> usize {
        self.shape.n_features
    }

    fn n_classes(&self) -> usize {
        self.shape.n_classes
    }

    fn kind(&self) -> OracleKind {
        OracleKind::Subprocess
    }

    fn concurrent_safe(&self) -> bool {
        false
    }

    fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
        let request = format_request(batch);
        let mut guard = self.conn.lock().expect("oracle connection poisoned");
        let mut restarted = false;
        loop {
            if guard.is_none() {
                let (conn, shape) = Self::start(&self.command, self.timeout)?;
                if shape != self.shape {
                    conn.close();
                    return Err(OracleFailure::Handshake {
                        expected: format!("{:?}", self.shape),
                        declared: format!("{shape:?}"),
                    }
                    .into());
                }
                *guard = Some(conn);
            }
            let conn = guard.as_mut().unwrap();
            match self.round_trip(conn, &request) {
                Ok(probs) => return Ok(probs),
                Err(e) => {
                    // the child is in an unknown state after any failure
                    if let Some(c) = guard.take() {
                        c.close();
                    }
                    if is_crash(&e) && !restarted {
                        log::warn!("oracle process crashed ({e}); restarting once");
                        restarted = true;
                        continue;
                    }
                    return Err(e.into());
                }
            }
        }
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        if let Ok(mut g) = self.conn.lock() {
            if let Some(c) = g.take() {
                c.close();
            }
        }
    }
}
