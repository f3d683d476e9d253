//! Loopback tests for the live backend stack: a minimal HTTP/1.1 server
//! on 127.0.0.1 scripts status/body sequences, and the tests assert the
//! client's wire shape, retry policy, caching, and record/replay.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use dialectqa::backend::{
    cache_key, BackendConfig, CachingBackend, ChatBackend, CompletionRequest, FinishReason,
    HttpBackend, Provenance, RecordingBackend, ReplayBackend,
};
use dialectqa::prompt::{ChatMessage, ChatPrompt, DecodingParams};
use dialectqa::Error;

struct Canned {
    status: u16,
    body: String,
}

fn ok_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }],
        "usage": {"prompt_tokens": 21, "completion_tokens": 7}
    })
    .to_string()
}

#[derive(Debug)]
struct CapturedRequest {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

fn read_request(stream: &mut TcpStream) -> CapturedRequest {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut line = String::new();
    reader.read_line(&mut line).expect("request line");
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).expect("header line");
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        let lower = header.to_ascii_lowercase();
        if let Some(value) = lower.strip_prefix("content-length:") {
            content_length = value.trim().parse().expect("content length");
        }
        if lower.starts_with("authorization:") {
            authorization = Some(header[header.find(':').expect("colon") + 1..].trim().to_string());
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).expect("body");
    CapturedRequest {
        path,
        authorization,
        body: serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null),
    }
}

/// Serves the canned exchanges in order, one connection each, capturing
/// what the client sent. Returns the base url to point the backend at.
fn spawn_server(
    responses: Vec<Canned>,
) -> (String, Arc<Mutex<Vec<CapturedRequest>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    let captured = Arc::new(Mutex::new(Vec::new()));
    let sink = Arc::clone(&captured);
    let handle = std::thread::spawn(move || {
        for canned in responses {
            let (mut stream, _) = listener.accept().expect("accept");
            let request = read_request(&mut stream);
            sink.lock().expect("capture lock").push(request);
            let response = format!(
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                canned.status,
                canned.body.len(),
                canned.body
            );
            stream.write_all(response.as_bytes()).expect("write response");
        }
    });
    (format!("http://{addr}/v1"), captured, handle)
}

fn test_config(base_url: &str) -> BackendConfig {
    BackendConfig {
        base_url: base_url.to_string(),
        api_key: "test-key-123".to_string(),
        timeout: Duration::from_secs(5),
        max_retries: 2,
        retry_backoff: vec![Duration::from_millis(1)],
        max_in_flight: 2,
    }
}

fn sample_request(tag: &str) -> CompletionRequest {
    let prompt = ChatPrompt::new(vec![
        ChatMessage::system("You are a privacy policy expert."),
        ChatMessage::user("Is my location shared?"),
    ])
    .with_decoding(DecodingParams {
        temperature: 0.0,
        max_tokens: 256,
    });
    CompletionRequest {
        model: "test-model".to_string(),
        prompt,
        request_tag: tag.to_string(),
    }
}

#[test]
fn happy_path_sends_bearer_and_wire_shape() {
    let (base_url, captured, handle) =
        spawn_server(vec![Canned { status: 200, body: ok_body("Label: Relevant") }]);
    let backend = HttpBackend::new(test_config(&base_url)).expect("backend");

    let completion = backend.complete(&sample_request("ex1/answer")).expect("complete");
    assert_eq!(completion.content, "Label: Relevant");
    assert_eq!(completion.finish_reason, FinishReason::Stop);
    assert_eq!(completion.provenance, Provenance::Live);
    let usage = completion.usage.expect("usage");
    assert_eq!(usage.prompt_tokens, 21);
    assert_eq!(usage.completion_tokens, 7);
    assert_eq!(backend.requests_sent(), 1);

    handle.join().expect("server");
    let captured = captured.lock().expect("capture lock");
    let request = &captured[0];
    assert_eq!(request.path, "/v1/chat/completions");
    assert_eq!(request.authorization.as_deref(), Some("Bearer test-key-123"));
    assert_eq!(request.body["model"], "test-model");
    assert_eq!(request.body["temperature"], 0.0);
    assert_eq!(request.body["max_tokens"], 256);
    let messages = request.body["messages"].as_array().expect("messages");
    assert_eq!(messages.len(), 2);
    assert_eq!(messages[0]["role"], "system");
    assert_eq!(messages[1]["content"], "Is my location shared?");
}

#[test]
fn rate_limit_is_retried_until_success() {
    let (base_url, _captured, handle) = spawn_server(vec![
        Canned { status: 429, body: "slow down".to_string() },
        Canned { status: 200, body: ok_body("Agree") },
    ]);
    let backend = HttpBackend::new(test_config(&base_url)).expect("backend");

    let completion = backend.complete(&sample_request("ex1/evaluate#0")).expect("complete");
    assert_eq!(completion.content, "Agree");
    assert_eq!(backend.requests_sent(), 2);
    handle.join().expect("server");
}

#[test]
fn client_errors_are_terminal_with_excerpt() {
    let (base_url, _captured, handle) = spawn_server(vec![Canned {
        status: 400,
        body: "{\"error\": \"bad request: unknown model\"}".to_string(),
    }]);
    let backend = HttpBackend::new(test_config(&base_url)).expect("backend");

    let err = backend.complete(&sample_request("ex1/answer")).expect_err("must fail");
    match err {
        Error::Protocol { request_tag, status, body_excerpt } => {
            assert_eq!(request_tag, "ex1/answer");
            assert_eq!(status, 400);
            assert!(body_excerpt.contains("unknown model"));
        }
        other => panic!("expected Protocol error, got {other:?}"),
    }
    assert_eq!(backend.requests_sent(), 1, "4xx must not be retried");
    handle.join().expect("server");
}

#[test]
fn server_errors_exhaust_retries() {
    let flaky = (0..3)
        .map(|_| Canned { status: 503, body: "overloaded".to_string() })
        .collect();
    let (base_url, _captured, handle) = spawn_server(flaky);
    let backend = HttpBackend::new(test_config(&base_url)).expect("backend");

    let err = backend.complete(&sample_request("ex2/translate")).expect_err("must fail");
    match err {
        Error::Transport { message, .. } => {
            assert!(message.contains("gave up after 3 attempts"), "{message}");
        }
        other => panic!("expected Transport error, got {other:?}"),
    }
    assert_eq!(backend.requests_sent(), 3);
    handle.join().expect("server");
}

#[test]
fn malformed_json_is_not_retried() {
    let (base_url, _captured, handle) =
        spawn_server(vec![Canned { status: 200, body: "not json {".to_string() }]);
    let backend = HttpBackend::new(test_config(&base_url)).expect("backend");

    let err = backend.complete(&sample_request("ex3/answer")).expect_err("must fail");
    assert!(matches!(err, Error::MalformedResponse { .. }), "{err:?}");
    assert_eq!(backend.requests_sent(), 1);
    handle.join().expect("server");
}

#[test]
fn cache_hits_skip_the_network() {
    let (base_url, _captured, handle) =
        spawn_server(vec![Canned { status: 200, body: ok_body("Label: Irrelevant") }]);
    let dir = tempfile::tempdir().expect("tempdir");
    let http = HttpBackend::new(test_config(&base_url)).expect("backend");
    let cached = CachingBackend::new(http, dir.path().join("cache")).expect("cache");

    let first = cached.complete(&sample_request("ex4/answer")).expect("first");
    assert_eq!(first.provenance, Provenance::Live);
    let second = cached.complete(&sample_request("ex4/answer")).expect("second");
    assert_eq!(second.provenance, Provenance::Cache);
    assert_eq!(second.content, first.content);
    assert_eq!(cached.inner().requests_sent(), 1, "second call must be served from disk");
    handle.join().expect("server");
}

#[test]
fn recorded_runs_replay_without_a_server() {
    let (base_url, _captured, handle) =
        spawn_server(vec![Canned { status: 200, body: ok_body("Final Label: Relevant") }]);
    let dir = tempfile::tempdir().expect("tempdir");
    let log_path = dir.path().join("record.jsonl");

    let http = HttpBackend::new(test_config(&base_url)).expect("backend");
    let recording = RecordingBackend::new(http, &log_path).expect("recorder");
    let request = sample_request("ex5/reconsider#1");
    let live = recording.complete(&request).expect("live");
    handle.join().expect("server");

    // The server is gone; the replay must still answer, keyed by the
    // same request identity.
    let replay = ReplayBackend::load(&log_path).expect("load");
    assert_eq!(replay.len(), 1);
    let replayed = replay.complete(&request).expect("replay");
    assert_eq!(replayed.content, live.content);
    assert_eq!(replayed.provenance, Provenance::Replay);

    let mut other = sample_request("ex5/reconsider#1");
    other.model = "different-model".to_string();
    let err = replay.complete(&other).expect_err("must miss");
    match err {
        Error::ReplayMiss { key, .. } => assert_eq!(key, cache_key(&other)),
        other => panic!("expected ReplayMiss, got {other:?}"),
    }
}
