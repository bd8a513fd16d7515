//! Client for an external scoring process speaking JSON lines over stdio.
//!
//! The process announces itself with a handshake line
//! `{"ready":true,"backend":...,"max_length":...}`, then answers each request
//! `{"id","candidate","references","direction"}` with either
//! `{"id","scores":[...]}` or `{"id","error":"..."}`, in request order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::neural::{Direction, ScoreRequest, ScoreVector, Scorer};
use crate::error::{Error, Result};

/// Environment variable holding the shell command that launches the scorer.
pub const SCORER_CMD_ENV: &str = "FAIRSUMM_SCORER_CMD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub ready: bool,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub max_length: Option<usize>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: String,
    candidate: &'a str,
    references: &'a [String],
    direction: Direction,
}

#[derive(Deserialize)]
struct WireResponse {
    id: String,
    #[serde(default)]
    scores: Option<Vec<f64>>,
    #[serde(default)]
    error: Option<String>,
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    next_id: u64,
}

pub struct SidecarScorer {
    name: String,
    handshake: Handshake,
    conn: Mutex<Connection>,
    child: Option<Mutex<Child>>,
}

fn protocol(message: impl Into<String>) -> Error {
    Error::Scorer {
        value_index: None,
        message: message.into(),
    }
}

impl SidecarScorer {
    /// Launches `command` through `sh -c` and waits for the handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| protocol(format!("cannot launch {command:?}: {e}")))?;
        let stdin = child.stdin.take().ok_or_else(|| protocol("no stdin"))?;
        let stdout = child.stdout.take().ok_or_else(|| protocol("no stdout"))?;
        let mut scorer = Self::connect(BufReader::new(stdout), stdin)?;
        scorer.child = Some(Mutex::new(child));
        Ok(scorer)
    }

    /// Launches the command named by `FAIRSUMM_SCORER_CMD`.
    pub fn from_env() -> Result<Self> {
        let cmd = std::env::var(SCORER_CMD_ENV).map_err(|_| protocol(format!("{SCORER_CMD_ENV} is not set")))?;
        Self::spawn(&cmd)
    }

    /// Wraps already-open streams; reads the handshake first.
    pub fn connect(mut reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Result<Self> {
        let mut line = String::new();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| protocol(format!("reading handshake: {e}")))?;
        if n == 0 {
            return Err(protocol("scorer exited before the handshake"));
        }
        let handshake: Handshake =
            serde_json::from_str(line.trim()).map_err(|e| protocol(format!("bad handshake {:?}: {e}", line.trim())))?;
        if !handshake.ready {
            return Err(protocol("scorer reported not ready"));
        }
        let name = handshake.backend.clone().unwrap_or_else(|| "sidecar".to_string());
        Ok(Self {
            name,
            handshake,
            conn: Mutex::new(Connection {
                reader: Box::new(reader),
                writer: Box::new(writer),
                next_id: 0,
            }),
            child: None,
        })
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }
}

impl Scorer for SidecarScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_length(&self) -> Option<usize> {
        self.handshake.max_length
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreVector> {
        self.score_batch(std::slice::from_ref(request))
            .pop()
            .unwrap_or_else(|| Err(protocol("empty batch")))
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<ScoreVector>> {
        let mut conn = match self.conn.lock() {
            Ok(c) => c,
            Err(_) => return requests.iter().map(|_| Err(protocol("connection poisoned"))).collect(),
        };
        match exchange(&mut conn, requests) {
            Ok(results) => results,
            Err(e) => {
                let msg = e.to_string();
                requests.iter().map(|_| Err(protocol(msg.clone()))).collect()
            }
        }
    }
}

fn exchange(conn: &mut Connection, requests: &[ScoreRequest]) -> Result<Vec<Result<ScoreVector>>> {
    let mut ids = Vec::with_capacity(requests.len());
    for req in requests {
        let id = format!("req-{}", conn.next_id);
        conn.next_id += 1;
        let wire = WireRequest {
            id: id.clone(),
            candidate: &req.candidate,
            references: &req.references,
            direction: req.direction,
        };
        let mut line = serde_json::to_string(&wire)?;
        line.push('\n');
        conn.writer
            .write_all(line.as_bytes())
            .map_err(|e| protocol(format!("writing request: {e}")))?;
        ids.push(id);
    }
    conn.writer
        .flush()
        .map_err(|e| protocol(format!("flushing requests: {e}")))?;

    let mut out = Vec::with_capacity(requests.len());
    for (id, req) in ids.iter().zip(requests) {
        let mut line = String::new();
        let n = conn
            .reader
            .read_line(&mut line)
            .map_err(|e| protocol(format!("reading response: {e}")))?;
        if n == 0 {
            return Err(protocol("scorer closed its output"));
        }
        let resp: WireResponse =
            serde_json::from_str(line.trim()).map_err(|e| protocol(format!("bad response {:?}: {e}", line.trim())))?;
        if &resp.id != id {
            return Err(protocol(format!(
                "response id {:?} does not match request {id:?}",
                resp.id
            )));
        }
        out.push(match (resp.scores, resp.error) {
            (_, Some(err)) if err.contains("length limit") => Err(Error::LengthLimit {
                value_index: None,
                message: err,
            }),
            (_, Some(err)) => Err(protocol(err)),
            (Some(scores), None) if scores.len() == req.references.len() => ScoreVector::new(scores),
            (Some(scores), None) => Err(Error::DimensionMismatch {
                expected: req.references.len(),
                found: scores.len(),
            }),
            (None, None) => Err(protocol(format!("response {id:?} has neither scores nor error"))),
        });
    }
    Ok(out)
}

impl Drop for SidecarScorer {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut child) = child.lock() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
