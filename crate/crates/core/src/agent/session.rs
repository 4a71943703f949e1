//! The tool-calling repair loop.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::client::{ChatClient, ChatMessage, ChatRequest, ClientError, DEFAULT_MODEL};
use super::hack::{detect_hack, HackReport};
use super::prompts::{build_initial_prompt, build_system_prompt};
use super::tools::{parse_tool_call, tool_schema};
use crate::cost::{estimate_reply_tokens, estimate_request_tokens, UsageRecord};
use crate::env::{AgentAction, Environment, Observation, DEFAULT_TRUNCATION_LIMIT};
use crate::notebook::{ErrorContext, Notebook};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Hard cap on actions, `finish` included.
    pub max_steps: usize,
    pub session_timeout: Duration,
    pub model_id: String,
    /// Corrective re-prompts allowed per step after an invalid tool call.
    pub parse_retries: usize,
    pub truncation_limit: usize,
    pub temperature: f64,
    /// Re-run the failing cell after `finish`. Turn off for notebooks whose
    /// cells have side effects.
    pub verify: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_steps: 15,
            session_timeout: Duration::from_secs(15 * 60),
            model_id: DEFAULT_MODEL.to_string(),
            parse_retries: 2,
            truncation_limit: DEFAULT_TRUNCATION_LIMIT,
            temperature: 0.0,
            verify: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    FinishedSuccess,
    FinishedUnresolved,
    MaxSteps,
    Timeout,
    Aborted,
    Failed,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::FinishedSuccess => "finished_success",
            SessionStatus::FinishedUnresolved => "finished_unresolved",
            SessionStatus::MaxSteps => "max_steps",
            SessionStatus::Timeout => "timeout",
            SessionStatus::Aborted => "aborted",
            SessionStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Agent,
    SingleAction,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Agent => "agent",
            Strategy::SingleAction => "single_action",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "agent" => Ok(Strategy::Agent),
            "single_action" => Ok(Strategy::SingleAction),
            _ => Err(format!("unknown strategy `{s}` (expected agent or single_action)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub status: SessionStatus,
    pub strategy: Strategy,
    pub steps_taken: usize,
    /// Every message sent to or received from the model, in order.
    pub transcript: Vec<ChatMessage>,
    pub final_notebook: Notebook,
    pub usage: Vec<UsageRecord>,
    pub hack_report: HackReport,
    /// The failing cell was re-executed after the session.
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionResult {
    /// Steps spent on the repair itself, not counting a closing `finish`.
    pub fn resolution_steps(&self) -> usize {
        let finished = matches!(self.status, SessionStatus::FinishedSuccess | SessionStatus::FinishedUnresolved);
        if finished && self.strategy == Strategy::Agent {
            self.steps_taken.saturating_sub(1).max(1)
        } else {
            self.steps_taken
        }
    }

    pub fn prompt_tokens(&self) -> u64 {
        self.usage.iter().map(|u| u.prompt_tokens).sum()
    }

    pub fn completion_tokens(&self) -> u64 {
        self.usage.iter().map(|u| u.completion_tokens).sum()
    }
}

/// A result tagged with the session it came from; the on-disk transcript format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    #[serde(flatten)]
    pub result: SessionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    Action { step: usize, action: AgentAction },
    Observation { step: usize, observation: Observation },
}

pub trait SessionObserver {
    fn on_event(&mut self, event: &SessionEvent);

    /// Polled before every model call.
    fn abort_requested(&self) -> bool {
        false
    }
}

/// Ignores events, never aborts.
pub struct NoopObserver;

impl SessionObserver for NoopObserver {
    fn on_event(&mut self, _: &SessionEvent) {}
}

/// Collects events in memory.
impl SessionObserver for Vec<SessionEvent> {
    fn on_event(&mut self, event: &SessionEvent) {
        self.push(event.clone());
    }
}

pub(crate) struct Run<'a> {
    pub env: &'a mut Environment,
    pub err: &'a ErrorContext,
    pub cfg: &'a AgentConfig,
    pub strategy: Strategy,
    pub original: Notebook,
    pub deadline: Instant,
    pub transcript: Vec<ChatMessage>,
    pub usage: Vec<UsageRecord>,
    pub steps: usize,
}

impl<'a> Run<'a> {
    pub fn new(env: &'a mut Environment, err: &'a ErrorContext, cfg: &'a AgentConfig, strategy: Strategy) -> Self {
        let deadline = Instant::now() + cfg.session_timeout;
        env.set_deadline(Some(deadline));
        env.set_truncation_limit(cfg.truncation_limit);
        let original = env.notebook().clone();
        Run { env, err, cfg, strategy, original, deadline, transcript: Vec::new(), usage: Vec::new(), steps: 0 }
    }

    pub fn remaining(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }

    pub fn request(&self, tools: bool) -> ChatRequest {
        ChatRequest {
            model: self.cfg.model_id.clone(),
            messages: self.transcript.clone(),
            tools: tools.then(tool_schema),
            temperature: self.cfg.temperature,
            timeout: self.remaining(),
        }
    }

    /// Records usage for `reply` to `request`, estimating when the client gave none.
    pub fn record_usage(&mut self, request: &ChatRequest, reply: &ChatMessage) {
        let record = match reply.usage {
            Some(u) => UsageRecord {
                step: self.steps + 1,
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
                estimated: false,
            },
            None => UsageRecord {
                step: self.steps + 1,
                prompt_tokens: estimate_request_tokens(request),
                completion_tokens: estimate_reply_tokens(reply),
                estimated: true,
            },
        };
        self.usage.push(record);
    }

    /// Re-runs the originally failing cell and finalizes the result.
    pub fn finish(self) -> SessionResult {
        if !self.cfg.verify {
            return self.end(SessionStatus::FinishedSuccess, None);
        }
        self.env.set_deadline(None);
        let n = self.env.notebook().find_origin(self.err.cell_num).unwrap_or(self.err.cell_num);
        match self.env.execute_cell(n, String::new()) {
            Ok(obs) if obs.is_error => {
                let mut r = self.end(SessionStatus::FinishedUnresolved, None);
                r.verified = true;
                r
            }
            Ok(_) => {
                let hack_report = detect_hack(&self.original, self.env.notebook(), self.err);
                let mut r = self.end(SessionStatus::FinishedSuccess, None);
                r.verified = true;
                r.hack_report = hack_report;
                r
            }
            Err(e) => self.end(SessionStatus::Failed, Some(e.to_string())),
        }
    }

    pub fn end(self, status: SessionStatus, error: Option<String>) -> SessionResult {
        self.env.set_deadline(None);
        SessionResult {
            status,
            strategy: self.strategy,
            steps_taken: self.steps,
            transcript: self.transcript,
            final_notebook: self.env.notebook().clone(),
            usage: self.usage,
            hack_report: HackReport::default(),
            verified: false,
            error,
        }
    }
}

/// Calls the model, retrying once on a transient error.
pub(crate) fn call_model(client: &mut dyn ChatClient, request: &ChatRequest) -> Result<ChatMessage, ClientError> {
    match client.complete(request) {
        Err(e) if e.is_transient() => client.complete(request),
        other => other,
    }
}

fn client_failure(run: Run<'_>, e: ClientError) -> SessionResult {
    let status = if e == ClientError::Timeout || run.remaining().is_zero() {
        SessionStatus::Timeout
    } else {
        SessionStatus::Failed
    };
    run.end(status, Some(e.to_string()))
}

/// Runs the agent against an environment that already holds the failing state.
pub fn run_session(
    env: &mut Environment,
    err: &ErrorContext,
    client: &mut dyn ChatClient,
    cfg: &AgentConfig,
    observer: &mut dyn SessionObserver,
) -> SessionResult {
    let mut run = Run::new(env, err, cfg, Strategy::Agent);
    let (rendered, separator) = run.env.notebook().render_with_default_separator();
    run.transcript.push(ChatMessage::system(build_system_prompt()));
    run.transcript.push(ChatMessage::user(build_initial_prompt(&rendered, err.cell_num, &err.traceback, &separator)));

    loop {
        if observer.abort_requested() {
            return run.end(SessionStatus::Aborted, None);
        }
        if run.steps >= cfg.max_steps {
            return run.end(SessionStatus::MaxSteps, None);
        }
        if run.remaining().is_zero() {
            return run.end(SessionStatus::Timeout, None);
        }

        let mut corrections = 0;
        let (action, call_id) = loop {
            let request = run.request(true);
            let reply = match call_model(client, &request) {
                Ok(m) => m,
                Err(e) => return client_failure(run, e),
            };
            run.record_usage(&request, &reply);
            run.transcript.push(reply.clone());
            if run.remaining().is_zero() {
                return run.end(SessionStatus::Timeout, None);
            }
            match parse_tool_call(&reply) {
                Ok(action) => break (action, reply.tool_call.map(|c| c.id).unwrap_or_default()),
                Err(e) => {
                    if corrections == cfg.parse_retries {
                        return run.end(SessionStatus::Failed, Some(format!("invalid tool call: {e}")));
                    }
                    corrections += 1;
                    let fix = e.corrective_message();
                    run.transcript.push(match reply.tool_call {
                        Some(call) => ChatMessage::tool(call.id, fix),
                        None => ChatMessage::user(fix),
                    });
                }
            }
        };

        run.steps += 1;
        observer.on_event(&SessionEvent::Action { step: run.steps, action: action.clone() });
        if let AgentAction::Finish { .. } = action {
            run.transcript.push(ChatMessage::tool(call_id, ""));
            return run.finish();
        }
        let obs = match run.env.apply_action(&action) {
            Ok(obs) => obs,
            Err(e) => return run.end(SessionStatus::Failed, Some(e.to_string())),
        };
        run.transcript.push(ChatMessage::tool(call_id, obs.output_text.clone()));
        observer.on_event(&SessionEvent::Observation { step: run.steps, observation: obs });
    }
}
