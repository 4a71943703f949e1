//! Scripted evaluation: scenario fixtures, a replaying chat client and batch runs.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use nbfix_kernel::KernelSpec;
use rust_decimal::Decimal;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::agent::client::{ChatClient, ChatMessage, ChatRequest, ClientError, ToolCall, Usage};
use crate::agent::hack::HackFlag;
use crate::agent::session::{
    run_session, AgentConfig, NoopObserver, SessionRecord, SessionResult, SessionStatus, Strategy,
};
use crate::agent::run_single_action;
use crate::cost::{compute_cost, estimate_reply_tokens, estimate_request_tokens, summarize, PricingTable};
use crate::env::{EnvError, Environment};
use crate::notebook::{ErrorContext, Notebook, Output};

/// Directory of the scenarios shipped with this crate.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Sample pricing shipped with this crate.
pub fn sample_pricing_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("pricing.json")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ScenarioError({field}): {message}")]
pub struct ScenarioError {
    pub field: String,
    pub message: String,
}

impl ScenarioError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        ScenarioError { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Strategy the script was written for.
    pub strategy: Strategy,
    pub notebook: Notebook,
    pub failing_cell: usize,
    pub expected_ename: String,
    /// Relative path to file contents, written into the working directory.
    pub setup_files: BTreeMap<String, String>,
    pub script: Vec<ChatMessage>,
    /// Delay before every scripted reply.
    pub delay: Option<Duration>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::new("file", format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Loads every `*.json` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let entries = std::fs::read_dir(dir).map_err(|e| ScenarioError::new("dir", format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            load_scenario(p).map_err(|e| ScenarioError::new(&e.field, format!("{}: {}", p.display(), e.message)))
        })
        .collect()
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ScenarioError::new("json", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| ScenarioError::new("json", "top level is not an object"))?;
    let field = |k: &str| obj.get(k).filter(|v| !v.is_null()).ok_or_else(|| ScenarioError::new(k, "missing"));

    let name = field("name")?.as_str().filter(|s| !s.is_empty()).ok_or_else(|| ScenarioError::new("name", "must be a non-empty string"))?;
    let strategy = match obj.get("strategy") {
        None | Some(Value::Null) => Strategy::Agent,
        Some(Value::String(s)) => s.parse().map_err(|e: String| ScenarioError::new("strategy", e))?,
        Some(_) => return Err(ScenarioError::new("strategy", "must be a string")),
    };
    let notebook = match field("notebook")? {
        Value::String(s) => Notebook::parse(s),
        v @ Value::Object(_) => Notebook::from_value(v.clone()),
        _ => return Err(ScenarioError::new("notebook", "must be notebook text or an object")),
    }
    .map_err(|e| ScenarioError::new("notebook", e.to_string()))?;
    let failing_cell = field("failing_cell")?
        .as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| ScenarioError::new("failing_cell", "must be a positive integer"))?;
    match notebook.cell(failing_cell) {
        Some(c) if c.is_code() => {}
        Some(_) => return Err(ScenarioError::new("failing_cell", "is not a code cell")),
        None => return Err(ScenarioError::new("failing_cell", format!("no cell {failing_cell} in a notebook of {}", notebook.len()))),
    }
    let expected_ename = field("expected_ename")?
        .as_str()
        .ok_or_else(|| ScenarioError::new("expected_ename", "must be a string"))?
        .to_string();
    let setup_files = match obj.get("setup_files") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(m)) => parse_setup_files(m)?,
        Some(_) => return Err(ScenarioError::new("setup_files", "must be an object")),
    };
    let script = match field("script")? {
        Value::Array(items) if !items.is_empty() => {
            items.iter().enumerate().map(|(i, v)| parse_script_entry(i, v)).collect::<Result<Vec<_>, _>>()?
        }
        _ => return Err(ScenarioError::new("script", "must be a non-empty array")),
    };
    let delay = match obj.get("delay_ms") {
        None | Some(Value::Null) => None,
        Some(v) => Some(Duration::from_millis(v.as_u64().ok_or_else(|| ScenarioError::new("delay_ms", "must be an integer"))?)),
    };
    Ok(Scenario { name: name.to_string(), strategy, notebook, failing_cell, expected_ename, setup_files, script, delay })
}

fn parse_setup_files(m: &Map<String, Value>) -> Result<BTreeMap<String, String>, ScenarioError> {
    let mut files = BTreeMap::new();
    for (path, contents) in m {
        let p = Path::new(path);
        if path.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(ScenarioError::new("setup_files", format!("`{path}` must be a relative path inside the working directory")));
        }
        let text = contents
            .as_str()
            .ok_or_else(|| ScenarioError::new("setup_files", format!("contents of `{path}` must be a string")))?;
        files.insert(path.clone(), text.to_string());
    }
    Ok(files)
}

fn parse_script_entry(i: usize, v: &Value) -> Result<ChatMessage, ScenarioError> {
    let bad = |m: &str| ScenarioError::new("script", format!("entry {}: {m}", i + 1));
    let obj = v.as_object().ok_or_else(|| bad("must be an object"))?;
    let content = match obj.get("content") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(bad("`content` must be a string")),
    };
    let mut msg = ChatMessage::assistant(content);
    match obj.get("tool_call") {
        None | Some(Value::Null) if !obj.contains_key("content") => return Err(bad("needs `tool_call` or `content`")),
        None | Some(Value::Null) => {}
        Some(Value::Object(call)) => {
            let name = call.get("name").and_then(Value::as_str).ok_or_else(|| bad("`tool_call.name` must be a string"))?;
            // Arguments may be an object or raw text, which lets fixtures carry malformed JSON.
            let arguments = match call.get("arguments") {
                None | Some(Value::Null) => "{}".to_string(),
                Some(Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
            };
            msg.tool_call = Some(ToolCall { id: format!("call_{}", i + 1), name: name.to_string(), arguments });
        }
        Some(_) => return Err(bad("`tool_call` must be an object")),
    }
    Ok(msg)
}

impl Scenario {
    /// Writes the setup files under `dir`.
    pub fn stage(&self, dir: &Path) -> std::io::Result<()> {
        for (rel, contents) in &self.setup_files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, contents)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("a scripted client needs at least one reply")]
pub struct EmptyScript;

/// Replays canned replies in order. Usage is synthesized with the token
/// estimator over each request.
pub struct ScriptedClient {
    script: Vec<ChatMessage>,
    next: usize,
    delay: Option<Duration>,
    prompt_tokens: Vec<u64>,
}

impl ScriptedClient {
    pub fn new(script: Vec<ChatMessage>) -> Result<Self, EmptyScript> {
        if script.is_empty() {
            return Err(EmptyScript);
        }
        Ok(ScriptedClient { script, next: 0, delay: None, prompt_tokens: Vec::new() })
    }

    /// Sleeps before every reply. A delay longer than the request timeout
    /// sleeps for the timeout and fails with [`ClientError::Timeout`].
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn calls(&self) -> usize {
        self.next
    }

    /// Synthetic prompt token counts, one per answered request.
    pub fn prompt_tokens(&self) -> &[u64] {
        &self.prompt_tokens
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatMessage, ClientError> {
        if let Some(delay) = self.delay {
            std::thread::sleep(delay.min(request.timeout));
            if delay > request.timeout {
                return Err(ClientError::Timeout);
            }
        }
        let mut reply = self.script.get(self.next).cloned().ok_or(ClientError::Exhausted)?;
        self.next += 1;
        let prompt_tokens = estimate_request_tokens(request);
        self.prompt_tokens.push(prompt_tokens);
        reply.usage = Some(Usage { prompt_tokens, completion_tokens: estimate_reply_tokens(&reply) });
        Ok(reply)
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub pricing: PricingTable,
    pub config: AgentConfig,
    pub kernel: KernelSpec,
    pub workers: usize,
}

impl EvalOptions {
    pub fn new(pricing: PricingTable) -> Self {
        EvalOptions { pricing, config: AgentConfig::default(), kernel: KernelSpec::Mini, workers: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub strategy: Strategy,
    /// `None` when the scenario was invalid and did not run.
    pub status: Option<SessionStatus>,
    pub steps_taken: usize,
    pub resolution_steps: usize,
    pub hack_flags: Vec<HackFlag>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: Decimal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scenarios: Vec<ScenarioOutcome>,
    pub valid: usize,
    pub resolved: usize,
    pub resolved_rate: f64,
    /// Resolved, but with a hack flag raised.
    pub hacked: usize,
    pub hack_rate: f64,
    pub steps_histogram: BTreeMap<usize, usize>,
    pub mean_cost: BTreeMap<Strategy, Decimal>,
}

pub struct EvalRun {
    pub report: EvalReport,
    /// Results of every scenario that ran, sorted by name.
    pub records: Vec<SessionRecord>,
}

/// Replays `scenario` to its failing cell and runs its script.
pub fn run_scenario(scenario: &Scenario, opts: &EvalOptions) -> Result<SessionResult, String> {
    let dir = tempfile::tempdir().map_err(|e| format!("temp dir: {e}"))?;
    scenario.stage(dir.path()).map_err(|e| format!("staging setup files: {e}"))?;
    let mut env = Environment::start(scenario.notebook.clone(), &opts.kernel, dir.path()).map_err(|e| e.to_string())?;
    let err = reproduce(&mut env, scenario.failing_cell, &scenario.expected_ename)?;
    let mut client = ScriptedClient::new(scenario.script.clone()).map_err(|e| e.to_string())?;
    if let Some(d) = scenario.delay {
        client = client.with_delay(d);
    }
    Ok(match scenario.strategy {
        Strategy::Agent => run_session(&mut env, &err, &mut client, &opts.config, &mut NoopObserver),
        Strategy::SingleAction => run_single_action(&mut env, &err, &mut client, &opts.config, &mut NoopObserver),
    })
}

/// Replays cells up to `cell_num` and checks that the last one raises `expected`.
pub fn reproduce(env: &mut Environment, cell_num: usize, expected: &str) -> Result<ErrorContext, String> {
    let observations = env.replay_to_cell(cell_num).map_err(|e: EnvError| e.to_string())?;
    let got = observations.last().and_then(|o| o.ename.clone());
    if got.as_deref() != Some(expected) {
        return Err(format!("replay raised {got:?}, expected {expected}"));
    }
    error_context(env.notebook(), cell_num).ok_or_else(|| "failing cell has no error output".into())
}

/// Error recorded in the outputs of `cell_num`.
pub fn error_context(nb: &Notebook, cell_num: usize) -> Option<ErrorContext> {
    nb.cell(cell_num)?.outputs.iter().find_map(|o| match o {
        Output::Error { ename, evalue, traceback } => Some(ErrorContext {
            cell_num,
            traceback: traceback.join("\n"),
            ename: ename.clone(),
            evalue: evalue.clone(),
        }),
        _ => None,
    })
}

type ScenarioRun = (String, Strategy, Result<SessionResult, String>);

/// Runs every scenario, or only those written for `only`.
pub fn run_eval(scenarios: &[Scenario], only: Option<Strategy>, opts: &EvalOptions) -> EvalRun {
    let selected: Vec<&Scenario> = scenarios.iter().filter(|s| only.is_none_or(|o| s.strategy == o)).collect();
    let results: Mutex<Vec<ScenarioRun>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..opts.workers.clamp(1, selected.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(s) = selected.get(i) else { break };
                let r = run_scenario(s, opts);
                results.lock().unwrap().push((s.name.clone(), s.strategy, r));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));

    let mut outcomes = Vec::new();
    let mut records = Vec::new();
    for (name, strategy, r) in results {
        match r {
            Ok(res) => {
                outcomes.push(ScenarioOutcome {
                    name: name.clone(),
                    strategy,
                    status: Some(res.status),
                    steps_taken: res.steps_taken,
                    resolution_steps: res.resolution_steps(),
                    hack_flags: res.hack_report.flags(),
                    prompt_tokens: res.prompt_tokens(),
                    completion_tokens: res.completion_tokens(),
                    cost: compute_cost(&res.usage, &opts.pricing),
                    invalid: None,
                });
                records.push(SessionRecord { session_id: name, result: res });
            }
            Err(reason) => outcomes.push(ScenarioOutcome {
                name,
                strategy,
                status: None,
                steps_taken: 0,
                resolution_steps: 0,
                hack_flags: Vec::new(),
                prompt_tokens: 0,
                completion_tokens: 0,
                cost: Decimal::ZERO,
                invalid: Some(reason),
            }),
        }
    }

    let valid = records.len();
    let resolved = outcomes.iter().filter(|o| o.status == Some(SessionStatus::FinishedSuccess)).count();
    let hacked = outcomes
        .iter()
        .filter(|o| o.status == Some(SessionStatus::FinishedSuccess) && !o.hack_flags.is_empty())
        .count();
    let rate = |n: usize| if valid == 0 { 0.0 } else { n as f64 / valid as f64 };
    let (steps_histogram, mean_cost) = match summarize(&records, &opts.pricing) {
        Ok(summary) => (
            summary.steps_histogram,
            summary.comparison.into_iter().map(|row| (row.strategy, row.mean_cost)).collect(),
        ),
        Err(_) => (BTreeMap::new(), BTreeMap::new()),
    };
    EvalRun {
        report: EvalReport {
            scenarios: outcomes,
            valid,
            resolved,
            resolved_rate: rate(resolved),
            hacked,
            hack_rate: rate(hacked),
            steps_histogram,
            mean_cost,
        },
        records,
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
