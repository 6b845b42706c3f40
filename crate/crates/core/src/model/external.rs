//! External models spoken to over line-delimited JSON on a child process's
//! stdin/stdout.
//!
//! ```text
//! → {"id": 0, "op": "handshake", "n": 3}      ← {"id": 0, "ok": true, "gradients": false}
//! → {"id": 1, "op": "predict", "points": [[..], ..]}   ← {"id": 1, "values": [..]}
//! → {"id": 2, "op": "gradient", "points": [[..], ..]}  ← {"id": 2, "gradients": [[..], ..]}
//! ```
//!
//! A server may answer any request with `{"id": .., "error": "..."}`.
//! Requests on one handle are serialized; responses must carry the id of
//! the request they answer.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GradientCapability, Model, ModelKind};
use crate::error::{Error, Result};
use crate::feature_space::Point;

#[derive(Debug, Clone)]
pub struct ExternalOptions {
    /// Points per request.
    pub batch_size: usize,
    /// Maximum wait for any single response.
    pub timeout: Duration,
    /// Re-evaluate three probe points at connect and require identical output.
    pub probe_determinism: bool,
}

impl Default for ExternalOptions {
    fn default() -> Self {
        Self {
            batch_size: 256,
            timeout: Duration::from_secs(30),
            probe_determinism: true,
        }
    }
}

/// Per-op request counters, for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RequestStats {
    pub predict_requests: u64,
    pub gradient_requests: u64,
    pub points_sent: u64,
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    broken: Option<String>,
}

pub struct ExternalModel {
    command: String,
    n: usize,
    gradients: bool,
    options: ExternalOptions,
    session: Mutex<Session>,
    predict_requests: AtomicU64,
    gradient_requests: AtomicU64,
    points_sent: AtomicU64,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("n", &self.n)
            .field("gradients", &self.gradients)
            .finish()
    }
}

impl ExternalModel {
    /// Spawns `command` through `sh -c`, performs the handshake and the
    /// determinism probe.
    pub fn connect(command: &str, n: usize, options: ExternalOptions) -> Result<Self> {
        if options.batch_size == 0 {
            return Err(Error::invalid("external batch size must be positive"));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot spawn '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let session = Session {
            child,
            stdin,
            lines: rx,
            next_id: 0,
            broken: None,
        };
        let mut model = ExternalModel {
            command: command.to_string(),
            n,
            gradients: false,
            options,
            session: Mutex::new(session),
            predict_requests: AtomicU64::new(0),
            gradient_requests: AtomicU64::new(0),
            points_sent: AtomicU64::new(0),
        };

        let reply = model.request("handshake", json!({ "n": n })).map_err(|e| match e {
            Error::Model(why) => Error::Protocol(format!("handshake rejected for n = {n}: {why}")),
            other => other,
        })?;
        if reply.get("ok").and_then(Value::as_bool) != Some(true) {
            let why = reply
                .get("error")
                .and_then(Value::as_str)
                .unwrap_or("server did not acknowledge");
            return Err(Error::Protocol(format!("handshake rejected for n = {n}: {why}")));
        }
        model.gradients = match reply.get("gradients") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(other) => {
                return Err(Error::Protocol(format!(
                    "handshake field 'gradients' must be a boolean, got {other}"
                )))
            }
        };
        if model.options.probe_determinism {
            model.probe_determinism()?;
        }
        Ok(model)
    }

    fn probe_determinism(&self) -> Result<()> {
        let probes = vec![
            Point::zeros(self.n),
            Point::new(vec![1.0; self.n]),
            Point::new((0..self.n).map(|j| (j % 2) as f64).collect()),
        ];
        let first = self.predict_raw(&probes)?;
        let second = self.predict_raw(&probes)?;
        if first.iter().zip(&second).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(Error::Protocol(format!(
                "model '{}' is not deterministic: {:?} then {:?}",
                self.command, first, second
            )));
        }
        Ok(())
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn supports_gradients(&self) -> bool {
        self.gradients
    }

    pub fn stats(&self) -> RequestStats {
        RequestStats {
            predict_requests: self.predict_requests.load(Ordering::Relaxed),
            gradient_requests: self.gradient_requests.load(Ordering::Relaxed),
            points_sent: self.points_sent.load(Ordering::Relaxed),
        }
    }

    fn request(&self, op: &str, mut body: Value) -> Result<Value> {
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(why) = &session.broken {
            return Err(Error::Protocol(format!("connection unusable: {why}")));
        }
        let id = session.next_id;
        session.next_id += 1;
        body["id"] = json!(id);
        body["op"] = json!(op);
        let result = Self::exchange(&mut session, &body, id, self.options.timeout);
        if let Err(e) = &result {
            session.broken = Some(e.to_string());
            let _ = session.child.kill();
        }
        result
    }

    fn exchange(session: &mut Session, body: &Value, id: u64, timeout: Duration) -> Result<Value> {
        let mut line = serde_json::to_string(body)?;
        line.push('\n');
        session
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| session.stdin.flush())
            .map_err(|e| Error::Protocol(format!("write to model process failed: {e}")))?;
        let raw = match session.lines.recv_timeout(timeout) {
            Ok(Ok(raw)) => raw,
            Ok(Err(e)) => return Err(Error::Protocol(format!("read from model process failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Protocol(format!(
                    "no response to request {id} within {:?}",
                    timeout
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = session
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "closed its output".into());
                return Err(Error::Protocol(format!(
                    "model process ended before answering request {id} ({status})"
                )));
            }
        };
        let reply: Value = serde_json::from_str(&raw)
            .map_err(|e| Error::Protocol(format!("malformed response line '{raw}': {e}")))?;
        match reply.get("id").and_then(Value::as_u64) {
            Some(got) if got == id => {}
            got => {
                return Err(Error::Protocol(format!(
                    "response id {got:?} does not match request id {id}"
                )))
            }
        }
        if let Some(msg) = reply.get("error") {
            return Err(Error::Model(format!("model reported: {msg}")));
        }
        Ok(reply)
    }

    fn points_json(batch: &[Point]) -> Value {
        Value::Array(batch.iter().map(|p| json!(p.values())).collect())
    }

    fn predict_raw(&self, batch: &[Point]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.options.batch_size) {
            self.predict_requests.fetch_add(1, Ordering::Relaxed);
            self.points_sent.fetch_add(chunk.len() as u64, Ordering::Relaxed);
            let reply = self.request("predict", json!({ "points": Self::points_json(chunk) }))?;
            let values: Vec<f64> = reply
                .get("values")
                .cloned()
                .ok_or_else(|| Error::Protocol("predict response lacks 'values'".into()))
                .and_then(|v| {
                    serde_json::from_value(v)
                        .map_err(|e| Error::Protocol(format!("bad 'values' array: {e}")))
                })?;
            if values.len() != chunk.len() {
                return Err(Error::Protocol(format!(
                    "sent {} points, received {} values",
                    chunk.len(),
                    values.len()
                )));
            }
            out.extend(values);
        }
        Ok(out)
    }
}

impl Model for ExternalModel {
    fn n_features(&self) -> usize {
        self.n
    }

    fn kind(&self) -> ModelKind {
        ModelKind::External
    }

    fn gradient_capability(&self) -> GradientCapability {
        if self.gradients {
            GradientCapability::Analytic
        } else {
            GradientCapability::FiniteDifference
        }
    }

    fn predict(&self, batch: &[Point]) -> Result<Vec<f64>> {
        self.predict_raw(batch)
    }

    fn gradient(&self, batch: &[Point]) -> Result<Vec<Vec<f64>>> {
        if !self.gradients {
            return super::finite_difference_gradient(self, batch);
        }
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.options.batch_size) {
            self.gradient_requests.fetch_add(1, Ordering::Relaxed);
            self.points_sent.fetch_add(chunk.len() as u64, Ordering::Relaxed);
            let reply = self.request("gradient", json!({ "points": Self::points_json(chunk) }))?;
            let rows: Vec<Vec<f64>> = reply
                .get("gradients")
                .cloned()
                .ok_or_else(|| Error::Protocol("gradient response lacks 'gradients'".into()))
                .and_then(|v| {
                    serde_json::from_value(v)
                        .map_err(|e| Error::Protocol(format!("bad 'gradients' array: {e}")))
                })?;
            if rows.len() != chunk.len() || rows.iter().any(|r| r.len() != self.n) {
                return Err(Error::Protocol("gradient response has wrong shape".into()));
            }
            out.extend(rows);
        }
        Ok(out)
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let session = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = session.child.kill();
        let _ = session.child.wait();
    }
}

#[derive(Debug, Deserialize)]
struct WireRequest {
    id: Option<u64>,
    op: String,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum WireReply {
    Handshake { id: u64, ok: bool, gradients: bool },
    Values { id: u64, values: Vec<f64> },
    Gradients { id: u64, gradients: Vec<Vec<f64>> },
    Failure { id: Option<u64>, error: String },
}

/// Server-side knobs for [`serve`].
#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Advertise and answer `gradient` requests.
    pub gradients: bool,
    /// Stop (without answering) once this many requests have been answered.
    pub max_requests: Option<usize>,
}

/// Serves `model` over the wire protocol until `input` closes.
pub fn serve<R: BufRead, W: Write>(
    model: &dyn Model,
    input: R,
    mut output: W,
    options: &ServeOptions,
) -> Result<()> {
    let mut answered = 0usize;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if options.max_requests.is_some_and(|m| answered >= m) {
            return Ok(());
        }
        let reply = match serde_json::from_str::<WireRequest>(&line) {
            Err(e) => WireReply::Failure {
                id: None,
                error: format!("malformed request: {e}"),
            },
            Ok(req) => handle(model, req, options),
        };
        serde_json::to_writer(&mut output, &reply)?;
        output.write_all(b"\n")?;
        output.flush()?;
        answered += 1;
    }
    Ok(())
}

fn handle(model: &dyn Model, req: WireRequest, options: &ServeOptions) -> WireReply {
    let Some(id) = req.id else {
        return WireReply::Failure {
            id: None,
            error: "request lacks an id".into(),
        };
    };
    let fail = |error: String| WireReply::Failure {
        id: Some(id),
        error,
    };
    let points = |pts: Option<Vec<Vec<f64>>>| -> std::result::Result<Vec<Point>, String> {
        let pts = pts.ok_or("missing 'points'")?;
        if pts.iter().any(|p| p.len() != model.n_features()) {
            return Err(format!("points must have {} coordinates", model.n_features()));
        }
        Ok(pts.into_iter().map(Point::new).collect())
    };
    match req.op.as_str() {
        "handshake" => match req.n {
            Some(n) if n == model.n_features() => WireReply::Handshake {
                id,
                ok: true,
                gradients: options.gradients,
            },
            other => fail(format!(
                "model has {} features, client asked for {:?}",
                model.n_features(),
                other
            )),
        },
        "predict" => match points(req.points).and_then(|b| model.predict(&b).map_err(|e| e.to_string())) {
            Ok(values) => WireReply::Values { id, values },
            Err(e) => fail(e),
        },
        "gradient" if options.gradients => {
            match points(req.points).and_then(|b| model.gradient(&b).map_err(|e| e.to_string())) {
                Ok(gradients) => WireReply::Gradients { id, gradients },
                Err(e) => fail(e),
            }
        }
        "gradient" => fail("gradients not supported".into()),
        other => fail(format!("unknown op '{other}'")),
    }
}
