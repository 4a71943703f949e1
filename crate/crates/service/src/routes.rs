//! HTTP surface of the session service.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::sessions::{ApiError, CreateSession, Event, Session, Sessions};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::Validation(m) => (StatusCode::BAD_REQUEST, "validation", m),
            ApiError::NotFound => (StatusCode::NOT_FOUND, "not_found", "no such session".into()),
            ApiError::Gone => (StatusCode::GONE, "expired", "session expired".into()),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, "conflict", m),
            ApiError::NotReady => (StatusCode::CONFLICT, "not_ready", "session still running".into()),
            ApiError::Busy => (StatusCode::SERVICE_UNAVAILABLE, "busy", "too many running sessions".into()),
        };
        (status, Json(json!({"error": code, "message": message}))).into_response()
    }
}

pub fn router(sessions: Arc<Sessions>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create).get(list))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/sessions/{id}/abort", post(abort))
        .route("/v1/sessions/{id}/result", get(result))
        .route("/v1/sessions/{id}/notebook", get(notebook))
        .with_state(sessions)
}

/// Serves `router` on `listener` and collects expired sessions in the background.
pub async fn serve(listener: TcpListener, sessions: Arc<Sessions>) -> std::io::Result<()> {
    let gc = sessions.clone();
    let interval = gc.config().gc_interval;
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(interval);
        loop {
            tick.tick().await;
            gc.collect_garbage();
        }
    });
    axum::serve(listener, router(sessions)).await
}

async fn create(State(sessions): State<Arc<Sessions>>, body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return ApiError::Validation(e.body_text()).into_response(),
    };
    match sessions.create(req) {
        Ok(s) => (StatusCode::CREATED, Json(json!({"id": s.id}))).into_response(),
        Err(e) => e.into_response(),
    }
}

fn summary(s: &Session) -> Value {
    json!({"id": s.id, "status": s.status_str(), "created_at": s.created_at, "events": s.event_count()})
}

async fn list(State(sessions): State<Arc<Sessions>>) -> Json<Value> {
    Json(Value::Array(sessions.list().iter().map(|s| summary(s)).collect()))
}

#[derive(Deserialize)]
struct EventsQuery {
    after: Option<u64>,
}

fn to_sse(e: &Event) -> SseEvent {
    let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    SseEvent::default().id(e.seq.to_string()).event(kind).data(serde_json::to_string(e).unwrap_or_default())
}

struct Cursor {
    session: Arc<Session>,
    rx: tokio::sync::watch::Receiver<u64>,
    after: u64,
    pending: VecDeque<Event>,
    done: bool,
}

fn event_stream(session: Arc<Session>, after: u64) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    let rx = session.subscribe();
    let cursor = Cursor { session, rx, after, pending: VecDeque::new(), done: false };
    stream::unfold(cursor, |mut c| async move {
        loop {
            if let Some(e) = c.pending.pop_front() {
                c.after = e.seq;
                return Some((Ok(to_sse(&e)), c));
            }
            if c.done {
                return None;
            }
            c.rx.borrow_and_update();
            let (batch, finished) = c.session.events_after(c.after);
            if batch.is_empty() {
                if finished {
                    return None;
                }
                if c.rx.changed().await.is_err() {
                    c.done = true;
                }
                continue;
            }
            c.done = finished;
            c.pending.extend(batch);
        }
    })
}

async fn events(
    State(sessions): State<Arc<Sessions>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Response {
    let session = match sessions.get(&id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    let last_id = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let after = q.after.or(last_id).unwrap_or(0);
    Sse::new(event_stream(session, after)).keep_alive(KeepAlive::default()).into_response()
}

async fn abort(State(sessions): State<Arc<Sessions>>, Path(id): Path<String>) -> Response {
    match sessions.abort(&id) {
        Ok(()) => (StatusCode::ACCEPTED, Json(json!({"id": id, "abort": "requested"}))).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn result(State(sessions): State<Arc<Sessions>>, Path(id): Path<String>) -> Response {
    let session = match sessions.get(&id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    let Some(r) = session.result() else {
        return ApiError::NotReady.into_response();
    };
    Json(json!({
        "id": session.id,
        "status": r.status,
        "strategy": r.strategy,
        "steps_taken": r.steps_taken,
        "resolution_steps": r.resolution_steps(),
        "usage": {"prompt_tokens": r.prompt_tokens(), "completion_tokens": r.completion_tokens()},
        "hack_flags": r.hack_report.flags(),
        "verified": r.verified,
        "error": r.error,
        "notebook": r.final_notebook.serialize(),
    }))
    .into_response()
}

async fn notebook(State(sessions): State<Arc<Sessions>>, Path(id): Path<String>) -> Response {
    let session = match sessions.get(&id) {
        Ok(s) => s,
        Err(e) => return e.into_response(),
    };
    match session.result() {
        Some(r) => ([("content-type", "application/x-ipynb+json")], r.final_notebook.serialize()).into_response(),
        None => ApiError::NotReady.into_response(),
    }
}
