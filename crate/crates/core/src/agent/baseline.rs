//! Single-action strategy: one model call that rewrites the failing cell.

use super::client::{ChatClient, ChatMessage, ClientError};
use super::prompts::build_single_action_prompt;
use super::session::{AgentConfig, Run, SessionEvent, SessionObserver, SessionResult, SessionStatus, Strategy};
use crate::env::{AgentAction, Environment};
use crate::notebook::ErrorContext;

/// Body of the first fenced code block in `text`.
pub fn extract_code_block(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after_fence = &text[start + 3..];
    let body_start = after_fence.find('\n')? + 1;
    let body = &after_fence[body_start..];
    let end = body.find("```")?;
    Some(body[..end].strip_suffix('\n').unwrap_or(&body[..end]).to_string())
}

pub fn run_single_action(
    env: &mut Environment,
    err: &ErrorContext,
    client: &mut dyn ChatClient,
    cfg: &AgentConfig,
    observer: &mut dyn SessionObserver,
) -> SessionResult {
    let mut run = Run::new(env, err, cfg, Strategy::SingleAction);
    let (rendered, separator) = run.env.notebook().render_with_default_separator();
    run.transcript.push(ChatMessage::user(build_single_action_prompt(&rendered, err.cell_num, &err.traceback, &separator)));
    if observer.abort_requested() {
        return run.end(SessionStatus::Aborted, None);
    }

    let request = run.request(false);
    let reply = match client.complete(&request) {
        Ok(m) => m,
        Err(e) => {
            let status = if e == ClientError::Timeout { SessionStatus::Timeout } else { SessionStatus::Failed };
            return run.end(status, Some(e.to_string()));
        }
    };
    run.record_usage(&request, &reply);
    run.transcript.push(reply.clone());
    run.steps = 1;
    if run.remaining().is_zero() {
        return run.end(SessionStatus::Timeout, None);
    }
    let Some(code) = extract_code_block(&reply.content) else {
        return run.end(SessionStatus::Failed, Some("reply contains no fenced code block".into()));
    };

    let comment = reply.content[..reply.content.find("```").unwrap_or(0)].trim().to_string();
    let action = AgentAction::EditCell { cell_num: err.cell_num, source: code, comment };
    observer.on_event(&SessionEvent::Action { step: 1, action: action.clone() });
    match run.env.apply_action(&action) {
        Ok(obs) => observer.on_event(&SessionEvent::Observation { step: 1, observation: obs }),
        Err(e) => return run.end(SessionStatus::Failed, Some(e.to_string())),
    }
    run.finish()
}
