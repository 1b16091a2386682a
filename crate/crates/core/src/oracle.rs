//! Label sources queried by the learning loops.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use crate::error::OracleError;
use crate::label::{InstanceId, Label};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRequest {
    pub id: InstanceId,
    pub start_ms: Option<f64>,
    pub end_ms: Option<f64>,
}

impl QueryRequest {
    pub fn new(id: InstanceId) -> Self {
        QueryRequest { id, start_ms: None, end_ms: None }
    }

    pub fn with_span(mut self, start_ms: f64, end_ms: f64) -> Self {
        self.start_ms = Some(start_ms);
        self.end_ms = Some(end_ms);
        self
    }
}

pub trait Oracle {
    /// Asks for the true label of one instance. Every call counts as an
    /// issued query, answered or not.
    fn query(&mut self, request: &QueryRequest) -> Result<Label, OracleError>;

    fn queries_issued(&self) -> usize;

    /// The raw response to the most recent query, for sources that have one.
    fn last_response(&self) -> Option<&str> {
        None
    }
}

/// Answers from recorded ground truth.
#[derive(Debug, Clone, Default)]
pub struct ReplayOracle {
    labels: HashMap<InstanceId, Label>,
    issued: usize,
}

impl ReplayOracle {
    pub fn new(labels: impl IntoIterator<Item = (InstanceId, Label)>) -> Self {
        ReplayOracle { labels: labels.into_iter().collect(), issued: 0 }
    }

    pub fn insert(&mut self, id: InstanceId, label: Label) {
        self.labels.insert(id, label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl Oracle for ReplayOracle {
    fn query(&mut self, request: &QueryRequest) -> Result<Label, OracleError> {
        self.issued += 1;
        self.labels.get(&request.id).copied().ok_or(OracleError::Unknown(request.id.0))
    }

    fn queries_issued(&self) -> usize {
        self.issued
    }
}

/// Prompts a person for each label: `e` (eating), `n` (not eating) or
/// `skip`. Answers are read on a background thread so a query can time out.
pub struct InteractiveOracle<W: Write> {
    answers: Receiver<String>,
    prompt: W,
    timeout: Option<Duration>,
    issued: usize,
    last: Option<String>,
}

impl<W: Write> InteractiveOracle<W> {
    pub fn new<R>(input: R, prompt: W, timeout: Option<Duration>) -> Self
    where
        R: BufRead + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in input.lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        InteractiveOracle { answers: rx, prompt, timeout, issued: 0, last: None }
    }

    fn read_answer(&mut self, id: InstanceId) -> Result<String, OracleError> {
        let received = match self.timeout {
            Some(t) => self.answers.recv_timeout(t),
            None => self.answers.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        match received {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err(OracleError::Timeout(id.0)),
            Err(RecvTimeoutError::Disconnected) => Err(OracleError::Unavailable("input closed".into())),
        }
    }
}

impl<W: Write> Oracle for InteractiveOracle<W> {
    fn query(&mut self, request: &QueryRequest) -> Result<Label, OracleError> {
        self.issued += 1;
        self.last = None;
        let span = match (request.start_ms, request.end_ms) {
            (Some(s), Some(e)) => format!(" [{s:.0} ms .. {e:.0} ms]"),
            _ => String::new(),
        };
        let io = |e: std::io::Error| OracleError::Unavailable(e.to_string());
        loop {
            write!(self.prompt, "instance {}{span}: eating? [e/n/skip] ", request.id).map_err(io)?;
            self.prompt.flush().map_err(io)?;
            let answer = self.read_answer(request.id)?;
            let label = match answer.trim() {
                "e" | "E" => Some(Label::Eating),
                "n" | "N" => Some(Label::NonEating),
                "skip" => None,
                other => {
                    writeln!(self.prompt, "unrecognised answer {other:?}").map_err(io)?;
                    continue;
                }
            };
            self.last = Some(answer);
            return label.ok_or(OracleError::Declined(request.id.0));
        }
    }

    fn queries_issued(&self) -> usize {
        self.issued
    }

    fn last_response(&self) -> Option<&str> {
        self.last.as_deref()
    }
}
