use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use nbfix_core::agent::{ChatClient, ChatMessage, ChatRequest, ClientError, HttpChatClient};
use serde_json::{json, Value};

/// Serves one canned HTTP response and hands back the request it saw.
fn serve_once(status: u16, body: Value, delay: Duration) -> (String, thread::JoinHandle<(String, Value)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            head.push_str(&line);
            if line == "\r\n" {
                break;
            }
        }
        let mut buf = vec![0; len];
        reader.read_exact(&mut buf).unwrap();
        thread::sleep(delay);
        let text = body.to_string();
        let mut stream = stream;
        let _ = write!(stream, "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}", text.len());
        (head, serde_json::from_slice(&buf).unwrap())
    });
    (url, handle)
}

fn request(timeout: Duration) -> ChatRequest {
    ChatRequest {
        model: "gpt-4-0613".into(),
        messages: vec![ChatMessage::system("s"), ChatMessage::user("u")],
        tools: Some(nbfix_core::agent::tool_schema()),
        temperature: 0.0,
        timeout,
    }
}

#[test]
fn posts_chat_completions_and_reads_usage() {
    let reply = json!({
        "choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
            {"id": "call_9", "type": "function", "function": {"name": "finish", "arguments": "{\"comment\":\"ok\"}"}}
        ]}}],
        "usage": {"prompt_tokens": 321, "completion_tokens": 12}
    });
    let (url, server) = serve_once(200, reply, Duration::ZERO);
    let mut client = HttpChatClient::new(url, Some("sk-test".into()));
    let msg = client.complete(&request(Duration::from_secs(5))).unwrap();
    let (head, body) = server.join().unwrap();
    assert!(head.starts_with("POST /v1/chat/completions HTTP/1.1"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer sk-test"));
    assert_eq!(body["model"], "gpt-4-0613");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["tools"].as_array().unwrap().len(), 4);
    assert_eq!(msg.tool_call.unwrap().id, "call_9");
    assert_eq!(msg.usage.unwrap().prompt_tokens, 321);
}

#[test]
fn server_errors_are_transient() {
    let (url, server) = serve_once(503, json!({"error": "busy"}), Duration::ZERO);
    let err = HttpChatClient::new(url, None).complete(&request(Duration::from_secs(5))).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, ClientError::Http { status: 503, .. }));
    assert!(err.is_transient());
}

#[test]
fn slow_server_times_out() {
    let (url, _server) = serve_once(200, json!({}), Duration::from_secs(3));
    let err = HttpChatClient::new(url, None).complete(&request(Duration::from_millis(300))).unwrap_err();
    assert_eq!(err, ClientError::Timeout);
}
