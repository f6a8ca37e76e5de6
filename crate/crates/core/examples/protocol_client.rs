use std::net::TcpListener;
use std::thread;

use csk_probe::scorer::MockScorer;
use csk_probe::scorer::protocol::{self, Endpoint, ProtocolScorer, RetryPolicy};
use csk_probe::scorer::{ScoreRequest, Scorer};
use csk_probe::{Document, Segmenter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = Document::new("c", "Alligators are green. Frogs are green. The sky is blue.")?;
    let mock = MockScorer::from_documents(Segmenter::global(), [&doc])?;
    let vocab = mock.vocab_size() as u64;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = Endpoint::Tcp(listener.local_addr()?.to_string());
    thread::spawn(move || protocol::serve_tcp(listener, mock, Some(vocab)));

    let mut client = ProtocolScorer::connect(&endpoint, RetryPolicy::default(), Some("[MASK]"))?;
    println!("{endpoint} vocab {:?}", client.vocab_size());
    let requests = [
        ScoreRequest::new("p1", "Alligators are [MASK].", 3),
        ScoreRequest::new("p2", "The sky is [MASK].", 3),
    ];
    for prediction in client.score_batch(&requests)? {
        println!("{}\t{:?}", prediction.probe_id, prediction.candidates);
    }
    println!("green in vocab: {}", client.vocab_contains("green")?);
    Ok(())
}
