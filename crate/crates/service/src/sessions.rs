//! Session registry: runs agent sessions on blocking threads and keeps their
//! event logs for streaming.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use nbfix_core::agent::{
    run_session, AgentConfig, ChatClient, HttpChatClient, SessionEvent, SessionObserver, SessionResult, SessionStatus,
};
use nbfix_core::env::Environment;
use nbfix_core::notebook::{ErrorContext, Notebook};
use nbfix_kernel::KernelSpec;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;

pub const MAX_SESSIONS_VAR: &str = "NBFIX_MAX_SESSIONS";
pub const SESSION_TIMEOUT_VAR: &str = "NBFIX_SESSION_TIMEOUT_S";

/// Builds the chat client for a new session.
pub type ClientFactory = Arc<dyn Fn(&CreateSession) -> Result<Box<dyn ChatClient>, String> + Send + Sync>;

#[derive(Clone)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    pub agent: AgentConfig,
    pub kernel: KernelSpec,
    /// How long terminal sessions stay readable.
    pub retention: Duration,
    pub gc_interval: Duration,
    pub client_factory: ClientFactory,
}

impl ServiceConfig {
    /// Defaults, with a client talking to `AGENT_LLM_BASE_URL`.
    pub fn new() -> Self {
        let factory: ClientFactory = Arc::new(|_: &CreateSession| {
            HttpChatClient::from_env().map(|c| Box::new(c) as Box<dyn ChatClient>).map_err(|e| e.to_string())
        });
        ServiceConfig {
            max_sessions: 8,
            agent: AgentConfig::default(),
            kernel: KernelSpec::Mini,
            retention: Duration::from_secs(3600),
            gc_interval: Duration::from_secs(60),
            client_factory: factory,
        }
    }

    /// Applies `NBFIX_MAX_SESSIONS` and `NBFIX_SESSION_TIMEOUT_S`.
    pub fn with_env(mut self) -> Result<Self, String> {
        let read = |var: &str| -> Result<Option<u64>, String> {
            match std::env::var(var) {
                Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{var} must be a positive integer, got `{v}`")),
                Err(_) => Ok(None),
            }
        };
        if let Some(n) = read(MAX_SESSIONS_VAR)? {
            self.max_sessions = usize::try_from(n.max(1)).unwrap_or(usize::MAX);
        }
        if let Some(s) = read(SESSION_TIMEOUT_VAR)? {
            self.agent.session_timeout = Duration::from_secs(s.max(1));
        }
        Ok(self)
    }

    pub fn with_client_factory(mut self, factory: ClientFactory) -> Self {
        self.client_factory = factory;
        self
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig::new()
    }
}

/// Body of `POST /v1/sessions`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    /// Notebook document text, or the notebook as a JSON object.
    pub notebook: Value,
    pub cell_num: usize,
    pub traceback: String,
    /// Directory the kernel runs in. Defaults to a fresh temporary directory.
    #[serde(default)]
    pub workdir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Action,
    Observation,
    StatusChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiError {
    Validation(String),
    NotFound,
    Gone,
    Conflict(String),
    NotReady,
    Busy,
}

struct Log {
    status: Option<SessionStatus>,
    events: Vec<Event>,
    result: Option<SessionResult>,
    finished_at: Option<Instant>,
}

pub struct Session {
    pub id: String,
    pub created_at: u64,
    notebook_hash: u64,
    abort: AtomicBool,
    log: Mutex<Log>,
    latest: watch::Sender<u64>,
}

impl Session {
    fn push(&self, kind: EventKind, payload: Value) {
        let mut log = self.log.lock().unwrap();
        let seq = log.events.len() as u64 + 1;
        log.events.push(Event { seq, kind, payload });
        self.latest.send_replace(seq);
    }

    fn complete(&self, result: SessionResult) {
        let payload = json!({
            "status": result.status,
            "steps_taken": result.steps_taken,
            "error": result.error,
        });
        {
            let mut log = self.log.lock().unwrap();
            log.status = Some(result.status);
            log.result = Some(result);
            log.finished_at = Some(Instant::now());
        }
        self.push(EventKind::StatusChange, payload);
    }

    pub fn status(&self) -> Option<SessionStatus> {
        self.log.lock().unwrap().status
    }

    pub fn status_str(&self) -> &'static str {
        self.status().map(SessionStatus::as_str).unwrap_or("running")
    }

    /// Events with `seq > after`, and whether the log is complete.
    pub fn events_after(&self, after: u64) -> (Vec<Event>, bool) {
        let log = self.log.lock().unwrap();
        let from = usize::try_from(after).unwrap_or(usize::MAX).min(log.events.len());
        (log.events[from..].to_vec(), log.status.is_some())
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.latest.subscribe()
    }

    pub fn result(&self) -> Option<SessionResult> {
        self.log.lock().unwrap().result.clone()
    }

    pub fn event_count(&self) -> usize {
        self.log.lock().unwrap().events.len()
    }
}

struct Forwarder {
    session: Arc<Session>,
}

impl SessionObserver for Forwarder {
    fn on_event(&mut self, event: &SessionEvent) {
        let (kind, payload) = match event {
            SessionEvent::Action { step, action } => (EventKind::Action, json!({"step": step, "action": action})),
            SessionEvent::Observation { step, observation } => {
                (EventKind::Observation, json!({"step": step, "observation": observation}))
            }
        };
        self.session.push(kind, payload);
    }

    fn abort_requested(&self) -> bool {
        self.session.abort.load(Ordering::SeqCst)
    }
}

#[derive(Default)]
struct Registry {
    sessions: HashMap<String, Arc<Session>>,
    expired: HashSet<String>,
}

/// All sessions of one service instance.
pub struct Sessions {
    cfg: ServiceConfig,
    registry: Mutex<Registry>,
}

fn parse_error_line(traceback: &str) -> (String, String) {
    let last = traceback.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    match last.split_once(':') {
        Some((name, value)) if !name.contains(' ') => (name.to_string(), value.trim().to_string()),
        _ => (last.to_string(), String::new()),
    }
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Sessions {
    pub fn new(cfg: ServiceConfig) -> Arc<Self> {
        Arc::new(Sessions { cfg, registry: Mutex::new(Registry::default()) })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    /// Validates the request and starts the session on a blocking thread.
    pub fn create(self: &Arc<Self>, req: CreateSession) -> Result<Arc<Session>, ApiError> {
        let nb = match &req.notebook {
            Value::String(text) => Notebook::parse(text),
            v @ Value::Object(_) => Notebook::from_value(v.clone()),
            _ => return Err(ApiError::Validation("`notebook` must be notebook text or an object".into())),
        }
        .map_err(|e| ApiError::Validation(e.to_string()))?;
        if req.traceback.trim().is_empty() {
            return Err(ApiError::Validation("`traceback` must not be empty".into()));
        }
        let (ename, evalue) = parse_error_line(&req.traceback);
        let err = ErrorContext { cell_num: req.cell_num, traceback: req.traceback.clone(), ename, evalue };
        err.validate(&nb).map_err(|m| ApiError::Validation(format!("cell_num: {m}")))?;

        let mut hasher = DefaultHasher::new();
        nb.serialize().hash(&mut hasher);
        let notebook_hash = hasher.finish();

        let session = {
            let mut reg = self.registry.lock().unwrap();
            let running: Vec<&Arc<Session>> = reg.sessions.values().filter(|s| s.status().is_none()).collect();
            if running.len() >= self.cfg.max_sessions {
                return Err(ApiError::Busy);
            }
            if running.iter().any(|s| s.notebook_hash == notebook_hash) {
                return Err(ApiError::Conflict("a session for this notebook is already running".into()));
            }
            let (latest, _) = watch::channel(0);
            let session = Arc::new(Session {
                id: uuid::Uuid::new_v4().simple().to_string(),
                created_at: now_secs(),
                notebook_hash,
                abort: AtomicBool::new(false),
                log: Mutex::new(Log { status: None, events: Vec::new(), result: None, finished_at: None }),
                latest,
            });
            session.push(EventKind::StatusChange, json!({"status": "running"}));
            reg.sessions.insert(session.id.clone(), session.clone());
            session
        };

        let this = self.clone();
        let worker = session.clone();
        tokio::task::spawn_blocking(move || {
            let result = this.run(&worker, nb, err, &req);
            worker.complete(result);
        });
        Ok(session)
    }

    fn run(&self, session: &Arc<Session>, nb: Notebook, err: ErrorContext, req: &CreateSession) -> SessionResult {
        let failed = |nb: Notebook, message: String| SessionResult {
            status: SessionStatus::Failed,
            strategy: nbfix_core::agent::Strategy::Agent,
            steps_taken: 0,
            transcript: Vec::new(),
            final_notebook: nb,
            usage: Vec::new(),
            hack_report: Default::default(),
            verified: false,
            error: Some(message),
        };
        let tmp;
        let workdir = match &req.workdir {
            Some(dir) => dir.clone(),
            None => match tempfile::tempdir() {
                Ok(d) => {
                    tmp = d;
                    tmp.path().to_path_buf()
                }
                Err(e) => return failed(nb, format!("temp dir: {e}")),
            },
        };
        let mut env = match Environment::start(nb.clone(), &self.cfg.kernel, &workdir) {
            Ok(env) => env,
            Err(e) => return failed(nb, e.to_string()),
        };
        if let Err(e) = env.replay_to_cell(err.cell_num) {
            return failed(nb, e.to_string());
        }
        let mut client = match (self.cfg.client_factory)(req) {
            Ok(c) => c,
            Err(e) => return failed(nb, format!("chat client: {e}")),
        };
        let mut forwarder = Forwarder { session: session.clone() };
        run_session(&mut env, &err, &mut client, &self.cfg.agent, &mut forwarder)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let reg = self.registry.lock().unwrap();
        match reg.sessions.get(id) {
            Some(s) => Ok(s.clone()),
            None if reg.expired.contains(id) => Err(ApiError::Gone),
            None => Err(ApiError::NotFound),
        }
    }

    pub fn list(&self) -> Vec<Arc<Session>> {
        let reg = self.registry.lock().unwrap();
        let mut all: Vec<Arc<Session>> = reg.sessions.values().cloned().collect();
        all.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        all
    }

    pub fn abort(&self, id: &str) -> Result<(), ApiError> {
        let session = self.get(id)?;
        if session.status().is_some() {
            return Err(ApiError::Conflict("session already finished".into()));
        }
        if session.abort.swap(true, Ordering::SeqCst) {
            return Err(ApiError::Conflict("abort already requested".into()));
        }
        Ok(())
    }

    /// Drops terminal sessions older than the retention window.
    pub fn collect_garbage(&self) -> usize {
        let retention = self.cfg.retention;
        let mut reg = self.registry.lock().unwrap();
        let stale: Vec<String> = reg
            .sessions
            .iter()
            .filter(|(_, s)| s.log.lock().unwrap().finished_at.is_some_and(|t| t.elapsed() >= retention))
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            reg.sessions.remove(id);
            reg.expired.insert(id.clone());
        }
        stale.len()
    }
}
