#![allow(dead_code)]

use std::path::PathBuf;

use labrag::chunking::Chunk;
use labrag::corpus::{load_corpus, load_qa, Corpus, QaPair};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

pub fn toy() -> (Corpus, Vec<QaPair>) {
    let corpus = load_corpus(data_dir().join("corpus.jsonl")).unwrap();
    let qa = load_qa(data_dir().join("qa.jsonl"), &corpus).unwrap();
    (corpus, qa)
}

pub fn chunk(id: &str, text: &str) -> Chunk {
    Chunk {
        chunk_id: id.to_string(),
        doc_id: id.split('#').next().unwrap().to_string(),
        ordinal: 0,
        char_start: 0,
        char_end: text.chars().count(),
        token_count: labrag::chunking::count_tokens(text),
        text: text.to_string(),
    }
}

/// Minimal HTTP/1.1 server on an ephemeral port. `handler` gets the request
/// path and parsed JSON body and returns a status and a response body.
pub fn mock_server<F>(handler: F) -> String
where
    F: Fn(&str, serde_json::Value) -> (u16, String) + Send + Sync + 'static,
{
    use std::io::{BufRead, BufReader, Read, Write};

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handler = std::sync::Arc::new(handler);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = handler.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    return;
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((name, value)) = line.split_once(':') {
                        if name.eq_ignore_ascii_case("content-length") {
                            length = value.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; length];
                reader.read_exact(&mut body).unwrap();
                let json = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                let (status, payload) = handler(&path, json);
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    format!("http://{addr}")
}
