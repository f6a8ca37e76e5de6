use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use csk_probe::scorer::protocol::Frame;
use csk_probe::scorer::{Endpoint, MockScorer, ProtocolScorer, RetryPolicy, ScoreRequest, Scorer, ScorerError};
use csk_probe::{Document, Segmenter};
use proptest::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_csk-probe");

fn docs() -> Vec<Document> {
    [
        "Bears eat fish. Bears eat honey. Bears sleep in winter.",
        "Cats sleep. Dogs eat bones and dogs walk.",
        "Birds eat seeds. Fish swim.",
    ]
    .iter()
    .enumerate()
    .map(|(i, t)| Document::new(format!("d{i}"), t).unwrap())
    .collect()
}

fn write_corpus(dir: &Path) -> String {
    let path = dir.join("corpus.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    for d in docs() {
        writeln!(f, "{}", serde_json::to_string(&d).unwrap()).unwrap();
    }
    path.to_str().unwrap().to_string()
}

fn mock() -> MockScorer {
    MockScorer::from_documents(Segmenter::global(), &docs()).unwrap()
}

fn requests(n: usize, top_k: usize) -> Vec<ScoreRequest> {
    (0..n).map(|i| ScoreRequest::new(format!("p{i:03}"), format!("Probe {i} [MASK]."), top_k)).collect()
}

fn fast() -> RetryPolicy {
    RetryPolicy {
        timeout: Duration::from_millis(300),
        retries: 2,
        backoff: Duration::from_millis(20),
    }
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_tcp(corpus: &str, extra: &[&str]) -> (Server, String) {
    let mut child = Command::new(BIN)
        .args(["mock-scorer", "--corpus", corpus, "--tcp", "127.0.0.1:0"])
        .args(extra)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening\t").expect("listening line").to_string();
    (Server(child), addr)
}

/// One-connection scripted server: `respond` gets each request frame and
/// its 0-based index and returns the reply lines.
fn fake_server<F>(respond: F) -> String
where
    F: Fn(Frame, usize) -> Vec<String> + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut out = stream.try_clone().unwrap();
        for (i, line) in BufReader::new(stream).lines().enumerate() {
            let Ok(line) = line else { break };
            for reply in respond(Frame::parse(&line).unwrap(), i) {
                if out.write_all(reply.as_bytes()).is_err() {
                    return;
                }
            }
        }
    });
    addr
}

fn hello(marker: &str) -> String {
    Frame::Hello {
        version: 1,
        mask_marker: Some(marker.into()),
        vocab_size: Some(3),
    }
    .to_line()
}

fn connect(addr: &str) -> Result<ProtocolScorer, ScorerError> {
    ProtocolScorer::connect(&Endpoint::Tcp(addr.into()), fast(), Some("[MASK]"))
}

#[test]
fn tcp_mock_matches_in_process_mock() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, addr) = spawn_tcp(&write_corpus(dir.path()), &[]);
    let mut remote = ProtocolScorer::connect(&Endpoint::Tcp(addr), RetryPolicy::default(), Some("[MASK]")).unwrap();
    let mut local = mock();
    assert_eq!(remote.vocab_size(), Some(local.vocab_size() as u64));
    assert_eq!(remote.mask_marker(), "[MASK]");
    let reqs = requests(25, 5);
    let first = remote.score_batch(&reqs).unwrap();
    assert_eq!(first, local.score_batch(&reqs).unwrap());
    assert_eq!(remote.score_batch(&reqs).unwrap(), first);
    let ids: Vec<&str> = first.iter().map(|p| p.probe_id.as_str()).collect();
    let want: Vec<&str> = reqs.iter().map(|r| r.probe_id.as_str()).collect();
    assert_eq!(ids, want);
    let one = remote.score_batch(&requests(3, 1)).unwrap();
    assert!(one.iter().all(|p| p.candidates.len() == 1));
    let tokens = ["bears", "Bears", "zebra", "two words"];
    let answers = remote.vocab_contains_batch(&tokens).unwrap();
    assert_eq!(answers, [true, true, false, false]);
    assert_eq!(answers, local.vocab_contains_batch(&tokens).unwrap());
    let n_true = local.vocab_size();
    assert_eq!(remote.vocab_size(), Some(n_true as u64));
}

#[test]
fn tcp_batching_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, addr) = spawn_tcp(&write_corpus(dir.path()), &[]);
    let mut remote = ProtocolScorer::connect(&Endpoint::Tcp(addr), RetryPolicy::default(), None).unwrap();
    let reqs = requests(40, 4);
    let whole = remote.score_batch(&reqs).unwrap();
    for size in [1, 3, 7, 40] {
        let parts: Vec<_> = reqs.chunks(size).flat_map(|c| remote.score_batch(c).unwrap()).collect();
        assert_eq!(parts, whole, "chunk size {size}");
    }
}

#[test]
fn stdio_endpoint_serves_the_same_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path());
    let endpoint: Endpoint = format!("stdio:{BIN} mock-scorer --corpus {corpus} --stdio").parse().unwrap();
    let mut remote = ProtocolScorer::connect(&endpoint, RetryPolicy::default(), Some("[MASK]")).unwrap();
    let reqs = requests(10, 3);
    assert_eq!(remote.score_batch(&reqs).unwrap(), mock().score_batch(&reqs).unwrap());
    assert!(remote.vocab_contains("fish").unwrap());
}

#[test]
fn mask_marker_mismatch_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, addr) = spawn_tcp(&write_corpus(dir.path()), &["--mask-marker", "<mask>"]);
    let err = connect(&addr).err().unwrap();
    assert!(matches!(err, ScorerError::Config(_)), "{err:?}");
}

#[test]
fn unreachable_endpoint_fails_after_retries() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().to_string()
    };
    let start = Instant::now();
    let err = connect(&addr).err().unwrap();
    assert!(matches!(err, ScorerError::Transport(_)), "{err:?}");
    assert!(err.to_string().contains("after 3 attempts"), "{err}");
    assert!(start.elapsed() >= Duration::from_millis(60));
}

#[test]
fn silent_scorer_times_out() {
    let addr = fake_server(|f, _| match f {
        Frame::Hello { .. } => vec![hello("[MASK]")],
        _ => Vec::new(),
    });
    let mut s = connect(&addr).unwrap();
    let err = s.score_batch(&requests(2, 3)).unwrap_err();
    assert!(matches!(err, ScorerError::Timeout { attempts: 3, pending: 2 }), "{err:?}");
}

#[test]
fn lost_response_is_recovered_by_resending() {
    let addr = fake_server(|f, i| match f {
        Frame::Hello { .. } => vec![hello("[MASK]")],
        Frame::Score { id, .. } if i > 1 => vec![Frame::Result { id, candidates: vec![("x".into(), -1.0)] }.to_line()],
        _ => Vec::new(),
    });
    let mut s = connect(&addr).unwrap();
    let out = s.score_batch(&requests(1, 3)).unwrap();
    assert_eq!(out[0].candidates, [("x".to_string(), -1.0)]);
}

#[test]
fn invalid_response_names_the_probe() {
    let addr = fake_server(|f, _| match f {
        Frame::Hello { .. } => vec![hello("[MASK]")],
        Frame::Score { id, .. } => vec![Frame::Result { id, candidates: vec![("a".into(), -2.0), ("b".into(), -1.0)] }.to_line()],
        _ => Vec::new(),
    });
    let mut s = connect(&addr).unwrap();
    match s.score_batch(&requests(1, 3)).unwrap_err() {
        ScorerError::Protocol { id, .. } => assert_eq!(id.as_deref(), Some("p000")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn remote_errors_are_reported() {
    let addr = fake_server(|f, _| match f {
        Frame::Hello { .. } => vec![hello("[MASK]")],
        Frame::Score { id, .. } => vec![Frame::Error { id: Some(id), message: "model exploded".into() }.to_line()],
        _ => Vec::new(),
    });
    let mut s = connect(&addr).unwrap();
    let err = s.score_batch(&requests(1, 3)).unwrap_err();
    assert!(matches!(&err, ScorerError::Remote { id: Some(id), .. } if id == "p000"), "{err:?}");
    assert!(err.to_string().contains("model exploded"));
}

#[test]
fn requests_without_exactly_one_marker_are_rejected_locally() {
    let mut m = mock();
    let bad = [ScoreRequest::new("a", "No mask here.", 3)];
    assert!(matches!(m.score_batch(&bad), Err(ScorerError::InvalidRequest { .. })));
    let zero = [ScoreRequest::new("a", "One [MASK].", 0)];
    assert!(matches!(m.score_batch(&zero), Err(ScorerError::InvalidRequest { .. })));
}

#[test]
fn raw_wire_exchange() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, addr) = spawn_tcp(&write_corpus(dir.path()), &[]);
    let stream = TcpStream::connect(&addr).unwrap();
    let mut out = stream.try_clone().unwrap();
    let mut lines = BufReader::new(stream).lines();
    out.write_all(b"{\"op\":\"hello\",\"version\":1}\n").unwrap();
    let reply = lines.next().unwrap().unwrap();
    assert_eq!(reply, format!("{{\"op\":\"hello\",\"version\":1,\"mask_marker\":\"[MASK]\",\"vocab_size\":{}}}", mock().vocab_size()));
    out.write_all(b"{\"op\":\"score\",\"id\":\"q\",\"text\":\"A [MASK].\",\"top_k\":1}\n").unwrap();
    let top = mock().score(&ScoreRequest::new("q", "A [MASK].", 1)).unwrap();
    let expected = Frame::Result { id: "q".into(), candidates: top.candidates }.to_line();
    assert_eq!(lines.next().unwrap().unwrap() + "\n", expected);
    out.write_all(b"not json\n").unwrap();
    assert!(lines.next().unwrap().unwrap().starts_with("{\"op\":\"error\""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mock_batching_is_transparent(n in 1usize..40, cuts in prop::collection::vec(1usize..10, 1..10), top_k in 1usize..30) {
        let mut m = mock();
        let reqs = requests(n, top_k);
        let whole = m.score_batch(&reqs).unwrap();
        let mut parts = Vec::new();
        let mut rest: &[ScoreRequest] = &reqs;
        for c in cuts.iter().cycle() {
            if rest.is_empty() { break; }
            let (a, b) = rest.split_at((*c).min(rest.len()));
            parts.extend(m.score_batch(a).unwrap());
            rest = b;
        }
        prop_assert_eq!(&parts, &whole);
        for p in &whole {
            prop_assert!(p.candidates.len() <= top_k);
            prop_assert!(p.candidates.windows(2).all(|w| w[0].1 >= w[1].1));
        }
    }
}
