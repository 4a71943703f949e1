#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use nbfix_core::agent::{action_to_call, ChatClient, ChatMessage};
use nbfix_core::env::AgentAction;
use nbfix_core::eval::ScriptedClient;
use nbfix_service::routes::router;
use nbfix_service::sessions::{ClientFactory, CreateSession, ServiceConfig, Sessions};
use serde_json::{json, Value};

pub fn call(action: AgentAction, i: usize) -> ChatMessage {
    ChatMessage::assistant_call(action_to_call(&action, format!("call_{i}")))
}

pub fn script(actions: Vec<AgentAction>) -> Vec<ChatMessage> {
    actions.into_iter().enumerate().map(|(i, a)| call(a, i + 1)).collect()
}

pub fn factory(script: Vec<ChatMessage>, delay: Duration) -> ClientFactory {
    Arc::new(move |_: &CreateSession| {
        let c = ScriptedClient::new(script.clone()).map_err(|e| e.to_string())?.with_delay(delay);
        Ok(Box::new(c) as Box<dyn ChatClient>)
    })
}

/// A create/finish script that fixes a NameError on `missing`.
pub fn fixing_script() -> Vec<ChatMessage> {
    script(vec![
        AgentAction::CreateCell { source: "missing = 0".into(), position: None, comment: "define it".into() },
        AgentAction::Finish { comment: "defined".into() },
    ])
}

pub fn execute_forever(cell: usize, n: usize) -> Vec<ChatMessage> {
    script((0..n).map(|_| AgentAction::ExecuteCell { cell_num: cell, comment: "retry".into() }).collect())
}

/// Two code cells; the second raises NameError and prints `x` first.
pub fn notebook(tag: usize) -> Value {
    json!({
        "cells": [
            {"cell_type": "code", "metadata": {}, "source": format!("x = {tag}"), "outputs": [], "execution_count": null},
            {"cell_type": "code", "metadata": {}, "source": "print(x)\nmissing", "outputs": [], "execution_count": null}
        ],
        "metadata": {},
        "nbformat": 4,
        "nbformat_minor": 5
    })
}

pub fn create_body(tag: usize) -> Value {
    json!({
        "notebook": notebook(tag),
        "cell_num": 2,
        "traceback": "Traceback (most recent call last):\nNameError: name 'missing' is not defined"
    })
}

pub struct Server {
    pub base: String,
    pub sessions: Arc<Sessions>,
    pub http: reqwest::Client,
}

pub async fn start(cfg: ServiceConfig) -> Server {
    let sessions = Sessions::new(cfg);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(sessions.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { base, sessions, http: reqwest::Client::new() }
}

impl Server {
    pub async fn create(&self, body: &Value) -> (u16, Value) {
        let r = self.http.post(format!("{}/v1/sessions", self.base)).json(body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        let text = r.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub async fn post(&self, path: &str) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    /// Reads SSE events until the stream ends or `stop_after` events arrived.
    pub async fn events(&self, id: &str, last_event_id: Option<u64>, stop_after: Option<usize>) -> Vec<(u64, Value)> {
        let mut req = self.http.get(format!("{}/v1/sessions/{id}/events", self.base));
        if let Some(n) = last_event_id {
            req = req.header("Last-Event-ID", n.to_string());
        }
        let mut resp = req.send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        let mut buf = String::new();
        let mut out = Vec::new();
        let read = async {
            while let Some(chunk) = resp.chunk().await.unwrap() {
                buf.push_str(&String::from_utf8_lossy(&chunk));
                while let Some(end) = buf.find("\n\n") {
                    let block: String = buf.drain(..end + 2).collect();
                    let mut id = None;
                    let mut data = String::new();
                    for line in block.lines() {
                        if let Some(v) = line.strip_prefix("id:") {
                            id = v.trim().parse::<u64>().ok();
                        } else if let Some(v) = line.strip_prefix("data:") {
                            data.push_str(v.trim_start());
                        }
                    }
                    if let Some(id) = id {
                        out.push((id, serde_json::from_str(&data).unwrap()));
                        if stop_after.is_some_and(|n| out.len() >= n) {
                            return;
                        }
                    }
                }
            }
        };
        tokio::time::timeout(Duration::from_secs(20), read).await.expect("event stream stalled");
        out
    }

    pub async fn wait_result(&self, id: &str) -> Value {
        for _ in 0..400 {
            let (status, body) = self.get(&format!("/v1/sessions/{id}/result")).await;
            if status == 200 {
                return body;
            }
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
        panic!("session {id} never finished");
    }
}
