//! A tiny HTTP server speaking the logit wire protocol, for tests.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use synmark_core::model::{toy_logits, ToyModelSpec};
use synmark_core::token::TokenId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    None,
    /// HTTP 500 for the first `n` requests.
    ServerErrors(usize),
    NanAt(usize),
    ShortBy(usize),
    WrongId,
}

pub struct StubServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
}

pub fn start(spec: ToyModelSpec, fault: Fault) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/logits", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    let spec = Arc::new(spec);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let spec = spec.clone();
            let counter = counter.clone();
            thread::spawn(move || serve(stream, &spec, fault, &counter));
        }
    });
    StubServer { url, requests }
}

fn serve(stream: TcpStream, spec: &ToyModelSpec, fault: Fault, counter: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let n = counter.fetch_add(1, Ordering::SeqCst);
    let request: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let id = request["request_id"].as_str().unwrap().to_string();
    let context: Vec<TokenId> = request["context"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| TokenId(v.as_u64().unwrap() as u32))
        .collect();

    let (status, payload) = match fault {
        Fault::ServerErrors(k) if n < k => ("500 Internal Server Error", "{}".to_string()),
        _ => {
            let mut logits: Vec<serde_json::Value> = toy_logits(spec, &context)
                .unwrap()
                .values()
                .iter()
                .map(|&x| x.into())
                .collect();
            let mut rid = id;
            match fault {
                Fault::NanAt(i) => logits[i] = "NaN".into(),
                Fault::ShortBy(k) => logits.truncate(logits.len() - k),
                Fault::WrongId => rid.push_str("-other"),
                _ => {}
            }
            let vocab = logits.len();
            let body = serde_json::json!({"request_id": rid, "vocab_size": vocab, "logits": logits});
            ("200 OK", body.to_string())
        }
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}
