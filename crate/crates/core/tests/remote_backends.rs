//! Remote clients against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use georeason_core::backends::{
    BackendConfig, BackendError, DetectorBackend, EncoderBackend, GenerationRequest, GeneratorBackend, ImageInput,
    RemoteDetector, RemoteEncoder, RemoteGenerator, SamplingOptions,
};
use serde_json::{json, Value};

#[derive(Clone)]
struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn reply(status: u16, body: Value) -> Reply {
    Reply {
        status,
        body: body.to_string(),
        delay: Duration::ZERO,
    }
}

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    headers: Vec<(String, String)>,
    body: Value,
}

/// Serves `replies` in order (the last one repeats) and records requests.
struct Server {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl Server {
    fn start(replies: Vec<Reply>) -> Server {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { break };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
                let mut headers = Vec::new();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
                        if k == "content-length" {
                            len = v.parse().unwrap();
                        }
                        headers.push((k, v));
                    }
                }
                let mut body = vec![0u8; len];
                reader.read_exact(&mut body).unwrap();
                log.lock().unwrap().push(Seen {
                    path,
                    headers,
                    body: serde_json::from_slice(&body).unwrap_or(Value::Null),
                });
                let r = replies[i.min(replies.len() - 1)].clone();
                thread::sleep(r.delay);
                let head = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    r.status,
                    r.body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(r.body.as_bytes());
            }
        });
        Server { url, seen }
    }

    fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn config(url: &str) -> BackendConfig {
    BackendConfig {
        timeout_secs: 5.0,
        max_retries: 2,
        backoff_base_secs: 0.0,
        ..BackendConfig::new(url)
    }
}

fn vector(dim: usize) -> Value {
    let mut values = vec![0.0; dim];
    values[0] = 1.0;
    json!({"dim": dim, "values": values})
}

#[test]
fn transient_5xx_is_retried() {
    let server = Server::start(vec![reply(503, json!({})), reply(200, vector(768))]);
    let enc = RemoteEncoder::new(config(&server.url), "clip", 768, false).unwrap();
    let v = enc.embed_image(b"png").unwrap();
    assert_eq!(v.dim(), 768);
    let seen = server.requests();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].path, "/embed");
    assert!(seen[0].body["image_b64"].is_string());
}

#[test]
fn client_errors_are_not_retried() {
    let server = Server::start(vec![reply(400, json!({"error": "bad"})), reply(200, vector(8))]);
    let enc = RemoteEncoder::new(config(&server.url), "clip", 8, false).unwrap();
    let err = enc.embed_image(b"png").unwrap_err();
    assert!(matches!(err, BackendError::Rejected { status: 400, .. }), "{err:?}");
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn persistent_5xx_exhausts_retries() {
    let server = Server::start(vec![reply(500, json!({}))]);
    let det = RemoteDetector::new(config(&server.url)).unwrap();
    let err = det.detect(ImageInput { id: "a.png", bytes: b"x" }, &["car".into()]).unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 3, .. }), "{err:?}");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let gen = RemoteGenerator::new(config(&format!("http://127.0.0.1:{port}")), "m").unwrap();
    let req = GenerationRequest {
        sample_id: "s".into(),
        images: vec![],
        prompt: "p".into(),
        options: SamplingOptions::default(),
    };
    let err = gen.generate(&req).unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 3, .. }), "{err:?}");
}

#[test]
fn wrong_dimension_is_reported() {
    let server = Server::start(vec![reply(200, vector(767))]);
    let enc = RemoteEncoder::new(config(&server.url), "clip", 768, false).unwrap();
    let err = enc.embed_image(b"png").unwrap_err();
    assert!(
        matches!(err, BackendError::DimensionMismatch { expected: 768, got: 767, .. }),
        "{err:?}"
    );
}

#[test]
fn slow_server_exceeds_deadline() {
    let server = Server::start(vec![Reply {
        delay: Duration::from_millis(1500),
        ..reply(200, vector(4))
    }]);
    let cfg = BackendConfig {
        timeout_secs: 0.3,
        max_retries: 0,
        ..config(&server.url)
    };
    let enc = RemoteEncoder::new(cfg, "clip", 4, false).unwrap();
    let err = enc.embed_image(b"png").unwrap_err();
    assert!(matches!(err, BackendError::DeadlineExceeded { .. }), "{err:?}");
}

#[test]
fn detector_validates_hits() {
    let good = json!({"detections": [{"x": 1.0, "y": 2.0, "w": 3.0, "h": 4.0, "term": "car", "confidence": 0.7}]});
    let server = Server::start(vec![reply(200, good)]);
    let det = RemoteDetector::new(config(&server.url)).unwrap();
    let hits = det.detect(ImageInput { id: "a.png", bytes: b"x" }, &["car".into()]).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].term, "car");
    assert_eq!(server.requests()[0].body["terms"], json!(["car"]));

    let stray = json!({"detections": [{"x": 1.0, "y": 2.0, "w": 3.0, "h": 4.0, "term": "tree", "confidence": 0.7}]});
    let server = Server::start(vec![reply(200, stray)]);
    let det = RemoteDetector::new(config(&server.url)).unwrap();
    let err = det.detect(ImageInput { id: "a.png", bytes: b"x" }, &["car".into()]).unwrap_err();
    assert!(matches!(err, BackendError::MalformedResponse { .. }));
}

#[test]
fn generator_sends_credentials_from_environment() {
    let answer = json!({"choices": [{"message": {"role": "assistant", "content": "PLACE {Chile, , , }. Andes."}}]});
    let server = Server::start(vec![reply(200, answer)]);
    std::env::set_var("GEOREASON_TEST_GENERATOR_KEY", "sk-test");
    let cfg = BackendConfig {
        api_key_env: Some("GEOREASON_TEST_GENERATOR_KEY".into()),
        ..config(&server.url)
    };
    let gen = RemoteGenerator::new(cfg, "vlm-7b").unwrap();
    let req = GenerationRequest {
        sample_id: "s".into(),
        images: vec![],
        prompt: "where?".into(),
        options: SamplingOptions {
            temperature: Some(0.2),
            ..SamplingOptions::default()
        },
    };
    assert_eq!(gen.generate(&req).unwrap(), "PLACE {Chile, , , }. Andes.");
    let seen = &server.requests()[0];
    assert_eq!(seen.path, "/generate");
    assert!(seen.headers.contains(&("authorization".into(), "Bearer sk-test".into())));
    assert_eq!(seen.body["model"], "vlm-7b");
    assert_eq!(seen.body["temperature"], 0.2);

    let missing = BackendConfig {
        api_key_env: Some("GEOREASON_TEST_UNSET_VARIABLE".into()),
        ..config(&server.url)
    };
    let gen = RemoteGenerator::new(missing, "vlm-7b").unwrap();
    assert!(matches!(gen.generate(&req), Err(BackendError::InvalidConfig(_))));
}
