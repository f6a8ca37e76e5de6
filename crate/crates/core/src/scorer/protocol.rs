//! Protocol v1: one JSON object per `\n`-terminated UTF-8 line over a
//! bidirectional byte stream (child-process stdio or TCP).
//!
//! ```text
//! {"op":"hello","version":1}
//!   -> {"op":"hello","version":1,"mask_marker":"[MASK]","vocab_size":N}
//! {"op":"score","id":"p1","text":"...","top_k":10}
//!   -> {"op":"result","id":"p1","candidates":[["animal",-1.2],...]}
//! {"op":"vocab","token":"animal"}
//!   -> {"op":"vocab","token":"animal","in_vocab":true}
//! failures -> {"op":"error","id":"p1","message":"..."}
//! ```
//!
//! Requests and responses are correlated by id (or by token for vocabulary
//! queries), so a server may answer out of order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RankedPrediction, ScoreRequest, Scorer, ScorerError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Frame {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask_marker: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vocab_size: Option<u64>,
    },
    Score {
        id: String,
        text: String,
        top_k: usize,
    },
    Result {
        id: String,
        candidates: Vec<(String, f64)>,
    },
    Vocab {
        token: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        in_vocab: Option<bool>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        message: String,
    },
}

impl Frame {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("frames serialize");
        s.push('\n');
        s
    }

    pub fn parse(line: &str) -> Result<Frame, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Where to reach a scorer: `tcp:HOST:PORT` or `stdio:COMMAND [ARGS...]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = ScorerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.rsplit_once(':').is_none_or(|(h, p)| h.is_empty() || p.parse::<u16>().is_err()) {
                return Err(ScorerError::Config(format!("bad tcp endpoint {s:?}, expected tcp:HOST:PORT")));
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(ScorerError::Config("stdio endpoint needs a command".into()));
            }
            return Ok(Endpoint::Stdio(argv));
        }
        Err(ScorerError::Config(format!("unknown endpoint {s:?}, expected tcp:HOST:PORT or stdio:COMMAND")))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp:{addr}"),
            Endpoint::Stdio(argv) => write!(f, "stdio:{}", argv.join(" ")),
        }
    }
}

/// Per-response timeout, number of retries, and the initial backoff, which
/// doubles on each retry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff: Duration::from_millis(100),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.backoff.saturating_mul(1u32 << attempt.min(16))
    }
}

/// Client side of protocol v1.
pub struct ProtocolScorer {
    writer: Option<Box<dyn Write + Send>>,
    incoming: Receiver<io::Result<String>>,
    tcp: Option<TcpStream>,
    child: Option<Child>,
    marker: String,
    vocab_size: Option<u64>,
    policy: RetryPolicy,
}

impl fmt::Debug for ProtocolScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolScorer")
            .field("marker", &self.marker)
            .field("vocab_size", &self.vocab_size)
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}

fn spawn_reader<R: io::Read + Send + 'static>(source: R) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    let _ = tx.send(Err(io::Error::new(io::ErrorKind::UnexpectedEof, "scorer closed the connection")));
                    return;
                }
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            }
        }
    });
    rx
}

impl ProtocolScorer {
    /// Connects and performs the handshake. When `expected_marker` is given,
    /// a scorer announcing a different mask marker is a configuration error.
    pub fn connect(endpoint: &Endpoint, policy: RetryPolicy, expected_marker: Option<&str>) -> Result<Self, ScorerError> {
        let mut scorer = match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = connect_tcp(addr, &policy)?;
                let incoming = spawn_reader(stream.try_clone()?);
                ProtocolScorer {
                    writer: Some(Box::new(stream.try_clone()?)),
                    incoming,
                    tcp: Some(stream),
                    child: None,
                    marker: String::new(),
                    vocab_size: None,
                    policy,
                }
            }
            Endpoint::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                ProtocolScorer {
                    writer: Some(Box::new(stdin)),
                    incoming: spawn_reader(stdout),
                    tcp: None,
                    child: Some(child),
                    marker: String::new(),
                    vocab_size: None,
                    policy,
                }
            }
        };
        scorer.handshake(expected_marker)?;
        Ok(scorer)
    }

    fn handshake(&mut self, expected_marker: Option<&str>) -> Result<(), ScorerError> {
        let hello = Frame::Hello {
            version: PROTOCOL_VERSION,
            mask_marker: None,
            vocab_size: None,
        };
        let mut attempt = 0;
        self.send(&[hello.clone()])?;
        loop {
            match self.recv()? {
                Some(Frame::Hello {
                    version,
                    mask_marker,
                    vocab_size,
                }) => {
                    if version != PROTOCOL_VERSION {
                        return Err(ScorerError::Config(format!("scorer speaks protocol version {version}")));
                    }
                    let marker = mask_marker.ok_or_else(|| ScorerError::protocol(None, "handshake lacks mask_marker"))?;
                    if let Some(expected) = expected_marker
                        && expected != marker
                    {
                        return Err(ScorerError::Config(format!(
                            "scorer uses mask marker {marker:?}, probes use {expected:?}"
                        )));
                    }
                    self.marker = marker;
                    self.vocab_size = vocab_size;
                    return Ok(());
                }
                Some(Frame::Error { id, message }) => return Err(ScorerError::Remote { id, message }),
                Some(_) => continue,
                None => {
                    attempt += 1;
                    if attempt > self.policy.retries {
                        return Err(ScorerError::Timeout { attempts: attempt, pending: 1 });
                    }
                    thread::sleep(self.policy.delay(attempt - 1));
                    self.send(&[hello.clone()])?;
                }
            }
        }
    }

    pub fn vocab_size(&self) -> Option<u64> {
        self.vocab_size
    }

    fn send(&mut self, frames: &[Frame]) -> Result<(), ScorerError> {
        let writer = self.writer.as_mut().ok_or_else(|| io::Error::from(io::ErrorKind::NotConnected))?;
        let mut buf = String::new();
        for f in frames {
            buf.push_str(&f.to_line());
        }
        writer.write_all(buf.as_bytes())?;
        writer.flush()?;
        Ok(())
    }

    /// Next frame, or `None` on timeout.
    fn recv(&mut self) -> Result<Option<Frame>, ScorerError> {
        match self.incoming.recv_timeout(self.policy.timeout) {
            Ok(Ok(line)) => {
                let line = line.trim_end_matches(['\n', '\r']);
                Frame::parse(line)
                    .map(Some)
                    .map_err(|e| ScorerError::protocol(None, format!("malformed frame {line:?}: {e}")))
            }
            Ok(Err(e)) => Err(ScorerError::Transport(e)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                Err(ScorerError::Transport(io::Error::new(io::ErrorKind::BrokenPipe, "scorer reader stopped")))
            }
        }
    }

    /// Sends `frames`, then collects answers with `accept` until `pending`
    /// keys are exhausted, retrying the still-pending frames on timeout.
    fn exchange<F>(&mut self, mut frames: HashMap<String, Frame>, mut accept: F) -> Result<(), ScorerError>
    where
        F: FnMut(Frame, &mut HashMap<String, Frame>) -> Result<(), ScorerError>,
    {
        let mut keys: Vec<&String> = frames.keys().collect();
        keys.sort();
        let batch: Vec<Frame> = keys.into_iter().map(|k| frames[k].clone()).collect();
        self.send(&batch)?;
        let mut attempt = 0;
        while !frames.is_empty() {
            match self.recv()? {
                Some(frame) => accept(frame, &mut frames)?,
                None => {
                    attempt += 1;
                    if attempt > self.policy.retries {
                        return Err(ScorerError::Timeout {
                            attempts: attempt,
                            pending: frames.len(),
                        });
                    }
                    thread::sleep(self.policy.delay(attempt - 1));
                    let mut keys: Vec<&String> = frames.keys().collect();
                    keys.sort();
                    let again: Vec<Frame> = keys.into_iter().map(|k| frames[k].clone()).collect();
                    self.send(&again)?;
                }
            }
        }
        Ok(())
    }
}

fn connect_tcp(addr: &str, policy: &RetryPolicy) -> Result<TcpStream, ScorerError> {
    let mut last = None;
    for attempt in 0..=policy.retries {
        if attempt > 0 {
            thread::sleep(policy.delay(attempt - 1));
        }
        let result = addr.to_socket_addrs().and_then(|mut addrs| {
            let sa = addrs
                .next()
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("{addr} did not resolve")))?;
            TcpStream::connect_timeout(&sa, policy.timeout)
        });
        match result {
            Ok(stream) => {
                stream.set_nodelay(true)?;
                return Ok(stream);
            }
            Err(e) => last = Some(e),
        }
    }
    let last = last.expect("at least one attempt");
    Err(ScorerError::Transport(io::Error::new(
        last.kind(),
        format!("{addr}: {last} (after {} attempts)", policy.retries + 1),
    )))
}

impl Scorer for ProtocolScorer {
    fn mask_marker(&self) -> &str {
        &self.marker
    }

    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<RankedPrediction>, ScorerError> {
        let mut by_id: HashMap<String, &ScoreRequest> = HashMap::new();
        for r in requests {
            r.validate(&self.marker)?;
            if let Some(prev) = by_id.insert(r.probe_id.clone(), r)
                && prev != r
            {
                return Err(ScorerError::InvalidRequest {
                    id: r.probe_id.clone(),
                    message: "same probe id used for different requests in one batch".into(),
                });
            }
        }
        let frames = by_id
            .iter()
            .map(|(id, r)| {
                let f = Frame::Score {
                    id: id.clone(),
                    text: r.text.clone(),
                    top_k: r.top_k,
                };
                (id.clone(), f)
            })
            .collect();
        let mut answers: HashMap<String, RankedPrediction> = HashMap::new();
        self.exchange(frames, |frame, pending| match frame {
            Frame::Result { id, candidates } => {
                if pending.remove(&id).is_some() {
                    let pred = RankedPrediction { probe_id: id, candidates };
                    pred.validate(by_id[&pred.probe_id])?;
                    answers.insert(pred.probe_id.clone(), pred);
                }
                Ok(())
            }
            Frame::Error { id, message } => {
                if id.as_ref().is_none_or(|i| by_id.contains_key(i)) {
                    Err(ScorerError::Remote { id, message })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        })?;
        Ok(requests.iter().map(|r| answers[&r.probe_id].clone()).collect())
    }

    fn vocab_contains(&mut self, token: &str) -> Result<bool, ScorerError> {
        Ok(self.vocab_contains_batch(&[token])?[0])
    }

    fn vocab_contains_batch(&mut self, tokens: &[&str]) -> Result<Vec<bool>, ScorerError> {
        let wanted: HashSet<&str> = tokens.iter().copied().collect();
        let frames = wanted
            .iter()
            .map(|&t| {
                let f = Frame::Vocab {
                    token: t.to_string(),
                    in_vocab: None,
                };
                (t.to_string(), f)
            })
            .collect();
        let mut answers: HashMap<String, bool> = HashMap::new();
        self.exchange(frames, |frame, pending| match frame {
            Frame::Vocab {
                token,
                in_vocab: Some(v),
            } => {
                if pending.remove(&token).is_some() {
                    answers.insert(token, v);
                }
                Ok(())
            }
            Frame::Error { id: None, message } => Err(ScorerError::Remote { id: None, message }),
            _ => Ok(()),
        })?;
        Ok(tokens.iter().map(|t| answers[*t]).collect())
    }
}

impl Drop for ProtocolScorer {
    fn drop(&mut self) {
        self.writer = None;
        if let Some(stream) = &self.tcp {
            let _ = stream.shutdown(Shutdown::Both);
        }
        if let Some(child) = &mut self.child {
            for _ in 0..25 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(20));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn error_frame(id: Option<String>, message: impl Into<String>) -> Frame {
    Frame::Error {
        id,
        message: message.into(),
    }
}

/// Answers one request line; `None` for blank lines.
pub fn handle_line<S: Scorer + ?Sized>(scorer: &mut S, vocab_size: Option<u64>, line: &str) -> Option<Frame> {
    let line = line.trim_end_matches(['\n', '\r']);
    if line.trim().is_empty() {
        return None;
    }
    let frame = match Frame::parse(line) {
        Ok(f) => f,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
            return Some(error_frame(id, format!("malformed frame: {e}")));
        }
    };
    Some(match frame {
        Frame::Hello { version, .. } if version == PROTOCOL_VERSION => Frame::Hello {
            version,
            mask_marker: Some(scorer.mask_marker().to_string()),
            vocab_size,
        },
        Frame::Hello { version, .. } => error_frame(None, format!("unsupported protocol version {version}")),
        Frame::Score { id, text, top_k } => {
            let request = ScoreRequest::new(id.clone(), text, top_k);
            match scorer.score_batch(std::slice::from_ref(&request)) {
                Ok(mut preds) => {
                    let pred = preds.remove(0);
                    Frame::Result {
                        id,
                        candidates: pred.candidates,
                    }
                }
                Err(ScorerError::InvalidRequest { message, .. }) => error_frame(Some(id), message),
                Err(e) => error_frame(Some(id), e.to_string()),
            }
        }
        Frame::Vocab { token, .. } => match scorer.vocab_contains(&token) {
            Ok(v) => Frame::Vocab {
                token,
                in_vocab: Some(v),
            },
            Err(e) => error_frame(None, e.to_string()),
        },
        Frame::Result { id, .. } => error_frame(Some(id), "unexpected op \"result\""),
        Frame::Error { id, .. } => error_frame(id, "unexpected op \"error\""),
    })
}

/// Serves protocol v1 on one stream until end of input.
pub fn serve<S, R, W>(scorer: &mut S, vocab_size: Option<u64>, reader: R, mut writer: W) -> io::Result<()>
where
    S: Scorer + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in reader.lines() {
        let line = line?;
        if let Some(reply) = handle_line(scorer, vocab_size, &line) {
            writer.write_all(reply.to_line().as_bytes())?;
            writer.flush()?;
        }
    }
    Ok(())
}

/// Accepts TCP connections forever, serving each on its own thread with a
/// clone of `scorer`.
pub fn serve_tcp<S>(listener: TcpListener, scorer: S, vocab_size: Option<u64>) -> io::Result<()>
where
    S: Scorer + Clone + Send + 'static,
{
    for stream in listener.incoming() {
        let stream = stream?;
        let mut scorer = scorer.clone();
        thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve(&mut scorer, vocab_size, reader, &stream);
        });
    }
    Ok(())
}
