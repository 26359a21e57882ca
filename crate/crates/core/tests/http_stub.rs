//! HTTP backend against a local stub server that replays canned responses.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use mars::gateway::{
    BackoffPolicy, ChatBackend, ChatRequest, CostLedger, Gateway, GatewayError, HttpBackend,
    ModelHandle, Role,
};

struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn reply(status: u16, body: &str) -> Reply {
    Reply { status, body: body.into(), delay: Duration::ZERO }
}

fn ok_body(content: &str, usage: Option<(u64, u64)>) -> String {
    let mut v = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    });
    if let Some((p, c)) = usage {
        v["usage"] = serde_json::json!({"prompt_tokens": p, "completion_tokens": c, "total_tokens": p + c});
    }
    v.to_string()
}

struct Stub {
    endpoint: String,
    requests: Arc<Mutex<Vec<String>>>,
    thread: JoinHandle<()>,
}

/// Serves one reply per connection, in order, then stops.
fn serve(replies: Vec<Reply>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let seen = requests.clone();
    let thread = std::thread::spawn(move || {
        for r in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut line = String::new();
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            seen.lock().unwrap().push(String::from_utf8(body).unwrap());
            std::thread::sleep(r.delay);
            let head = format!(
                "HTTP/1.1 {} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                r.status,
                r.body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(r.body.as_bytes());
        }
    });
    Stub { endpoint, requests, thread }
}

fn fast() -> HttpBackend {
    HttpBackend::new(Some("test-key".into())).with_backoff(BackoffPolicy {
        base: Duration::from_millis(5),
        factor: 2.0,
        jitter: 0.0,
        cap: Duration::from_millis(20),
    })
}

fn request() -> ChatRequest {
    ChatRequest::user("What is 2 + 2?", 0.0, 64)
}

#[test]
fn success_reports_usage_and_sends_the_request() {
    let stub = serve(vec![reply(200, &ok_body("4", Some((12, 3))))]);
    let handle = ModelHandle::http("gpt-test", &stub.endpoint);
    let (text, usage) = fast().complete(&handle, &request()).unwrap();
    stub.thread.join().unwrap();
    assert_eq!(text, "4");
    assert_eq!((usage.prompt_tokens, usage.completion_tokens), (12, 3));
    let sent: serde_json::Value = serde_json::from_str(&stub.requests.lock().unwrap()[0]).unwrap();
    assert_eq!(sent["model"], "gpt-test");
    assert_eq!(sent["messages"][0]["content"], "What is 2 + 2?");
    assert_eq!(sent["max_tokens"], 64);
    assert!(sent.get("sample").is_none());
}

#[test]
fn missing_usage_falls_back_to_estimate() {
    let stub = serve(vec![reply(200, &ok_body("four point zero", None))]);
    let handle = ModelHandle::http("m", &stub.endpoint);
    let (_, usage) = fast().complete(&handle, &request()).unwrap();
    stub.thread.join().unwrap();
    // 5 words -> ceil(6.5), 3 words -> ceil(3.9)
    assert_eq!((usage.prompt_tokens, usage.completion_tokens), (7, 4));
}

#[test]
fn rate_limit_then_success() {
    let stub = serve(vec![reply(429, "slow down"), reply(200, &ok_body("ok", Some((1, 1))))]);
    let handle = ModelHandle::http("m", &stub.endpoint).with_prices(1.0, 1.0);
    let ledger = Arc::new(CostLedger::new());
    let gw = Gateway::new(handle, Arc::new(fast()), ledger.clone());
    let c = gw.chat(Role::Evaluation, &request()).unwrap();
    stub.thread.join().unwrap();
    assert_eq!(c.text, "ok");
    assert_eq!(stub.requests.lock().unwrap().len(), 2);
    // only the successful call is billed
    assert_eq!(ledger.len(), 1);
}

#[test]
fn server_errors_exhaust_retries() {
    let mut handle = ModelHandle::http("m", "");
    handle.max_retries = 2;
    let stub = serve((0..3).map(|_| reply(503, "unavailable")).collect());
    handle.endpoint = Some(stub.endpoint.clone());
    let err = fast().complete(&handle, &request()).unwrap_err();
    stub.thread.join().unwrap();
    assert_eq!(err, GatewayError::ProviderError { status: 503, body: "unavailable".into() });
    assert_eq!(stub.requests.lock().unwrap().len(), 3);
}

#[test]
fn persistent_rate_limit_reports_attempts() {
    let mut handle = ModelHandle::http("m", "");
    handle.max_retries = 1;
    let stub = serve(vec![reply(429, ""), reply(429, "")]);
    handle.endpoint = Some(stub.endpoint.clone());
    let err = fast().complete(&handle, &request()).unwrap_err();
    stub.thread.join().unwrap();
    assert_eq!(err, GatewayError::RateLimited { attempts: 2 });
}

#[test]
fn client_error_is_not_retried() {
    let stub = serve(vec![reply(400, "bad request")]);
    let handle = ModelHandle::http("m", &stub.endpoint);
    let err = fast().complete(&handle, &request()).unwrap_err();
    stub.thread.join().unwrap();
    assert!(matches!(err, GatewayError::ProviderError { status: 400, .. }), "{err}");
    assert_eq!(stub.requests.lock().unwrap().len(), 1);
}

#[test]
fn slow_server_times_out() {
    let mut handle = ModelHandle::http("m", "");
    handle.timeout_seconds = 1;
    handle.max_retries = 0;
    let stub = serve(vec![Reply { delay: Duration::from_millis(1500), ..reply(200, &ok_body("late", None)) }]);
    handle.endpoint = Some(stub.endpoint.clone());
    let start = Instant::now();
    let err = fast().complete(&handle, &request()).unwrap_err();
    assert_eq!(err, GatewayError::Timeout { seconds: 1 });
    assert!(start.elapsed() < Duration::from_millis(1400));
    stub.thread.join().unwrap();
}

#[test]
fn malformed_success_body_is_fatal() {
    let stub = serve(vec![reply(200, "{\"choices\": []}")]);
    let handle = ModelHandle::http("m", &stub.endpoint);
    let err = fast().complete(&handle, &request()).unwrap_err();
    stub.thread.join().unwrap();
    assert!(matches!(err, GatewayError::ProviderError { status: 200, .. }), "{err}");
}
