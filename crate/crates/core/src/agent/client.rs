//! Chat-with-tools client contract and an HTTP implementation.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_MODEL: &str = "gpt-4-0613";
pub const BASE_URL_VAR: &str = "AGENT_LLM_BASE_URL";
pub const API_KEY_VAR: &str = "AGENT_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    /// Raw JSON text as produced by the model.
    pub arguments: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
    /// Set on tool messages: the call this message answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

impl ChatMessage {
    fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into(), tool_call: None, tool_call_id: None, usage: None }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::Assistant, content)
    }

    pub fn assistant_call(call: ToolCall) -> Self {
        ChatMessage { tool_call: Some(call), ..ChatMessage::new(Role::Assistant, "") }
    }

    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage { tool_call_id: Some(call_id.into()), ..ChatMessage::new(Role::Tool, content) }
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    /// Tool descriptors; `None` for plain chat.
    pub tools: Option<Value>,
    pub temperature: f64,
    /// Upper bound on how long the client may take to answer.
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("scripted client has no more replies")]
    Exhausted,
}

impl ClientError {
    /// Whether repeating the same request might succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatClient: Send {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatMessage, ClientError>;
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatMessage, ClientError> {
        (**self).complete(request)
    }
}

/// Client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpChatClient {
    base_url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        HttpChatClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            http: reqwest::blocking::Client::new(),
        }
    }

    /// Reads `AGENT_LLM_BASE_URL` and `AGENT_LLM_API_KEY`.
    pub fn from_env() -> Result<Self, ClientError> {
        let base = std::env::var(BASE_URL_VAR)
            .map_err(|_| ClientError::Transport(format!("{BASE_URL_VAR} is not set")))?;
        Ok(HttpChatClient::new(base, std::env::var(API_KEY_VAR).ok()))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatMessage, ClientError> {
        let mut req = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .timeout(request.timeout)
            .json(&request_body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout
            } else {
                ClientError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout
            } else {
                ClientError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(ClientError::Http { status: status.as_u16(), body });
        }
        let value: Value = serde_json::from_str(&body).map_err(|e| ClientError::Malformed(e.to_string()))?;
        parse_response(&value)
    }
}

/// Wire body for a chat-completions request.
pub fn request_body(request: &ChatRequest) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| match (&m.role, &m.tool_call, &m.tool_call_id) {
            (Role::Assistant, Some(call), _) => json!({
                "role": "assistant",
                "content": if m.content.is_empty() { Value::Null } else { json!(m.content) },
                "tool_calls": [{
                    "id": call.id,
                    "type": "function",
                    "function": {"name": call.name, "arguments": call.arguments},
                }],
            }),
            (Role::Tool, _, Some(id)) => json!({"role": "tool", "tool_call_id": id, "content": m.content}),
            (role, _, _) => json!({"role": role, "content": m.content}),
        })
        .collect();
    let mut body = json!({
        "model": request.model,
        "messages": messages,
        "temperature": request.temperature,
    });
    if let Some(tools) = &request.tools {
        body["tools"] = tools.clone();
    }
    body
}

/// Reads the first choice of a chat-completions response.
pub fn parse_response(v: &Value) -> Result<ChatMessage, ClientError> {
    let msg = v
        .pointer("/choices/0/message")
        .ok_or_else(|| ClientError::Malformed("no choices[0].message".into()))?;
    let content = msg.get("content").and_then(Value::as_str).unwrap_or_default();
    let mut out = ChatMessage::assistant(content);
    if let Some(call) = msg.pointer("/tool_calls/0") {
        let name = call.pointer("/function/name").and_then(Value::as_str);
        let args = call.pointer("/function/arguments");
        let Some(name) = name else {
            return Err(ClientError::Malformed("tool call without a function name".into()));
        };
        let arguments = match args {
            Some(Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => String::new(),
        };
        let id = call.get("id").and_then(Value::as_str).unwrap_or("call_0").to_string();
        out.tool_call = Some(ToolCall { id, name: name.to_string(), arguments });
    }
    if let Some(u) = v.get("usage") {
        let count = |k| u.get(k).and_then(Value::as_u64);
        if let (Some(p), Some(c)) = (count("prompt_tokens"), count("completion_tokens")) {
            out.usage = Some(Usage { prompt_tokens: p, completion_tokens: c });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_uses_tool_call_wire_format() {
        let call = ToolCall { id: "c1".into(), name: "finish".into(), arguments: r#"{"comment":""}"#.into() };
        let req = ChatRequest {
            model: DEFAULT_MODEL.into(),
            messages: vec![ChatMessage::system("s"), ChatMessage::assistant_call(call), ChatMessage::tool("c1", "")],
            tools: None,
            temperature: 0.0,
            timeout: Duration::from_secs(1),
        };
        let body = request_body(&req);
        assert_eq!(body["messages"][0], json!({"role": "system", "content": "s"}));
        assert_eq!(body["messages"][1]["tool_calls"][0]["function"]["name"], "finish");
        assert!(body["messages"][1]["content"].is_null());
        assert_eq!(body["messages"][2], json!({"role": "tool", "tool_call_id": "c1", "content": ""}));
        assert!(body.get("tools").is_none());
    }

    #[test]
    fn parses_tool_call_and_usage() {
        let v = json!({
            "choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
                {"id": "x", "type": "function", "function": {"name": "execute_cell", "arguments": "{\"cell_num\":1}"}}
            ]}}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 2, "total_tokens": 12}
        });
        let m = parse_response(&v).unwrap();
        assert_eq!(m.tool_call.unwrap().arguments, "{\"cell_num\":1}");
        assert_eq!(m.usage, Some(Usage { prompt_tokens: 10, completion_tokens: 2 }));
        assert!(parse_response(&json!({})).is_err());
    }
}
