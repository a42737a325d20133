#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use tulving::analysis::DataMatrix;
use tulving::stimuli::{ProbeOrder, StimulusSet, TargetItem};

pub fn workspace_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Stimulus set of `n` items built from letter-only pseudo-words, all distinct.
pub fn synthetic_set(n: usize) -> StimulusSet {
    let word = |role: &str, i: usize| {
        let letters: String = format!("{i:04}").bytes().map(|b| (b'a' + (b - b'0')) as char).collect();
        format!("{role}{letters}")
    };
    let items = (0..n)
        .map(|i| TargetItem {
            target: word("tgt", i),
            assoc_encoding_cue: word("ase", i),
            assoc_probe_cue: word("asp", i),
            rhyme_encoding_cue: word("rhe", i),
            rhyme_probe_cue: word("rhp", i),
        })
        .collect();
    StimulusSet::new(items, "synthetic").unwrap()
}

pub fn sample_set() -> StimulusSet {
    let text = std::fs::read_to_string(workspace_path("data/stimuli.json")).unwrap();
    tulving::load_stimulus_set(&text).unwrap()
}

/// Expected data matrices (AR order, RA order) for latent cells (XY, Xy, xY, xy), X associative,
/// worked out by hand from the latent-category model rather than by running the simulator.
pub fn expected_matrices(p: [f64; 4], reencode: bool) -> ([f64; 4], [f64; 4]) {
    let [both, x_only, y_only, neither] = p;
    if reencode {
        // A first-probe success converts the item to XY, so the second probe succeeds too.
        ([both + x_only, 0.0, y_only, neither], [both + y_only, 0.0, x_only, neither])
    } else {
        ([both, x_only, y_only, neither], [both, y_only, x_only, neither])
    }
}

pub fn exact_pair(p: [f64; 4], reencode: bool) -> (DataMatrix, DataMatrix) {
    let (ar, ra) = expected_matrices(p, reencode);
    (
        DataMatrix::from_frequencies(ProbeOrder::AR, None, ar).unwrap(),
        DataMatrix::from_frequencies(ProbeOrder::RA, None, ra).unwrap(),
    )
}

/// Minimal HTTP/1.1 server speaking the chat-completions wire format.
pub struct MockServer {
    pub base_url: String,
    pub requests: Arc<AtomicUsize>,
    pub bodies: Arc<Mutex<Vec<Value>>>,
    pub auth: Arc<Mutex<Vec<Option<String>>>>,
}

pub type Responder = dyn Fn(&Value) -> (u16, String) + Send + Sync;

impl MockServer {
    pub fn start(responder: Arc<Responder>) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let auth = Arc::new(Mutex::new(Vec::new()));
        let (req2, bodies2, auth2) = (requests.clone(), bodies.clone(), auth.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (responder, req, bodies, auth) = (responder.clone(), req2.clone(), bodies2.clone(), auth2.clone());
                std::thread::spawn(move || {
                    let _ = serve(stream, &*responder, &req, &bodies, &auth);
                });
            }
        });
        MockServer { base_url, requests, bodies, auth }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn serve(
    stream: TcpStream,
    responder: &Responder,
    requests: &AtomicUsize,
    bodies: &Mutex<Vec<Value>>,
    auth: &Mutex<Vec<Option<String>>>,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut len = 0usize;
    let mut bearer = None;
    let mut path = String::new();
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if let Some(p) = line.split_whitespace().nth(1) {
        path = p.to_string();
    }
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap_or(0);
        }
        if lower.starts_with("authorization:") {
            bearer = Some(line["authorization:".len()..].trim().to_string());
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    requests.fetch_add(1, Ordering::SeqCst);
    auth.lock().unwrap().push(bearer);
    let (status, payload) = if path.ends_with("/chat/completions") {
        let v: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        bodies.lock().unwrap().push(v.clone());
        responder(&v)
    } else {
        (404, "not found".to_string())
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}

pub fn completion(content: &str) -> (u16, String) {
    let v = json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    });
    (200, v.to_string())
}

pub fn user_messages(body: &Value) -> Vec<String> {
    body["messages"]
        .as_array()
        .map(|m| {
            m.iter()
                .filter(|m| m["role"] == "user")
                .map(|m| m["content"].as_str().unwrap_or_default().to_string())
                .collect()
        })
        .unwrap_or_default()
}

/// A model with perfect memory: probes are answered by repeating the study list.
pub fn echo_study_list() -> Arc<Responder> {
    Arc::new(|body: &Value| {
        let users = user_messages(body);
        if users.len() <= 1 {
            completion("Ready.")
        } else {
            completion(&users[0])
        }
    })
}

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tulving").chain(args.iter().copied());
    let code = tulving::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
