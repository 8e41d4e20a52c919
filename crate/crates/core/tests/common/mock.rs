//! One-request-per-connection HTTP server on a std listener.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

pub struct MockServer {
    pub url: String,
    pub log: Arc<Mutex<Vec<Request>>>,
}

/// Serve until the process exits; `respond` returns (status, body).
pub fn serve<F>(respond: F) -> MockServer
where
    F: Fn(&Request, usize) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&log);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                continue;
            }
            let mut parts = line.split_whitespace();
            let method = parts.next().unwrap_or_default().to_string();
            let path = parts.next().unwrap_or_default().to_string();
            let mut length = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let req = Request { method, path, body: String::from_utf8(body).unwrap() };
            let n = {
                let mut log = seen.lock().unwrap();
                log.push(req.clone());
                log.len() - 1
            };
            let (status, text) = respond(&req, n);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    MockServer { url, log }
}

/// Reactions in a /map request body.
pub fn reactions(body: &str) -> Vec<String> {
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    v["reactions"].as_array().unwrap().iter().map(|r| r.as_str().unwrap().to_string()).collect()
}

pub fn mapped_response(mapped: &[String], confidence: f64) -> String {
    serde_json::json!({ "mapped": mapped, "confidence": vec![confidence; mapped.len()] }).to_string()
}
