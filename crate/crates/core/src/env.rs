//! A notebook bound to a live kernel.
//!
//! [`Environment::apply_action`] turns agent actions into notebook mutations
//! and executions, and reports what happened as an [`Observation`]. Invalid
//! actions come back as error observations; only a dead kernel is an `Err`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nbfix_kernel::{ExecResult, Kernel, KernelError, KernelSpec, DEFAULT_EXEC_TIMEOUT};
use serde::{Deserialize, Serialize};

use crate::notebook::{Notebook, NotebookError, Output};

pub const DEFAULT_TRUNCATION_LIMIT: usize = 4000;
pub const TRUNCATION_MARKER: &str = "\n…[truncated]…\n";
const MIN_TRUNCATION_LIMIT: usize = 64;

/// One tool call from the agent. Every variant carries the agent's comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentAction {
    CreateCell {
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
        comment: String,
    },
    EditCell { cell_num: usize, source: String, comment: String },
    ExecuteCell { cell_num: usize, comment: String },
    Finish { comment: String },
}

impl AgentAction {
    pub fn comment(&self) -> &str {
        match self {
            AgentAction::CreateCell { comment, .. }
            | AgentAction::EditCell { comment, .. }
            | AgentAction::ExecuteCell { comment, .. }
            | AgentAction::Finish { comment } => comment,
        }
    }

    /// Tool name as exposed to the model.
    pub fn tool_name(&self) -> &'static str {
        match self {
            AgentAction::CreateCell { .. } => "create_cell",
            AgentAction::EditCell { .. } => "edit_cell",
            AgentAction::ExecuteCell { .. } => "execute_cell",
            AgentAction::Finish { .. } => "finish",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub action: AgentAction,
    pub output_text: String,
    pub is_error: bool,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_cell_num: Option<usize>,
    /// Exception name when execution raised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ename: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("environment down: {0}")]
    EnvironmentDown(String),
    #[error(transparent)]
    Notebook(#[from] NotebookError),
}

impl From<KernelError> for EnvError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::EnvironmentDown(m) => EnvError::EnvironmentDown(m),
        }
    }
}

/// Cuts `text` to at most `limit` characters plus the marker, keeping the
/// head and tail. `limit` below 64 is treated as 64.
pub fn truncate_output(text: &str, limit: usize) -> (String, bool) {
    let limit = limit.max(MIN_TRUNCATION_LIMIT);
    let len = text.chars().count();
    if len <= limit {
        return (text.to_string(), false);
    }
    let head = limit.div_ceil(2);
    let tail = limit / 2;
    let mut out: String = text.chars().take(head).collect();
    out.push_str(TRUNCATION_MARKER);
    out.extend(text.chars().skip(len - tail));
    (out, true)
}

/// stdout, stderr, then the result (or the traceback on error), each part
/// starting on its own line.
pub fn merge_output(r: &ExecResult) -> String {
    let last = if r.is_error() { r.traceback.as_deref() } else { r.result_repr.as_deref() };
    let mut out = String::new();
    for part in [r.stdout.as_str(), r.stderr.as_str(), last.unwrap_or("")] {
        if part.is_empty() {
            continue;
        }
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(part);
    }
    out
}

fn to_outputs(r: &ExecResult, count: u64) -> Vec<Output> {
    let mut outs = Vec::new();
    for (name, text) in [("stdout", &r.stdout), ("stderr", &r.stderr)] {
        if !text.is_empty() {
            outs.push(Output::Stream { name: name.into(), text: text.clone() });
        }
    }
    if let (Some(ename), Some(tb)) = (&r.ename, &r.traceback) {
        outs.push(Output::Error {
            ename: ename.clone(),
            evalue: r.evalue.clone().unwrap_or_default(),
            traceback: tb.lines().map(str::to_string).collect(),
        });
    } else if let Some(text) = &r.result_repr {
        outs.push(Output::Result { execution_count: Some(count), text: text.clone() });
    }
    outs
}

pub struct Environment {
    nb: Notebook,
    kernel: Box<dyn Kernel>,
    workdir: PathBuf,
    exec_timeout: Duration,
    truncation_limit: usize,
    deadline: Option<Instant>,
    exec_count: u64,
}

impl Environment {
    pub fn new(nb: Notebook, kernel: Box<dyn Kernel>, workdir: impl Into<PathBuf>) -> Self {
        Environment {
            nb,
            kernel,
            workdir: workdir.into(),
            exec_timeout: DEFAULT_EXEC_TIMEOUT,
            truncation_limit: DEFAULT_TRUNCATION_LIMIT,
            deadline: None,
            exec_count: 0,
        }
    }

    /// Starts a fresh kernel in `workdir` and binds it to `nb`.
    pub fn start(nb: Notebook, spec: &KernelSpec, workdir: &Path) -> Result<Self, EnvError> {
        let kernel = spec.start(workdir.to_path_buf())?;
        Ok(Environment::new(nb, kernel, workdir))
    }

    pub fn with_exec_timeout(mut self, timeout: Duration) -> Self {
        self.exec_timeout = timeout;
        self
    }

    pub fn with_truncation_limit(mut self, limit: usize) -> Self {
        self.truncation_limit = limit;
        self
    }

    pub fn set_truncation_limit(&mut self, limit: usize) {
        self.truncation_limit = limit;
    }

    /// Caps every later execution so that it ends by `deadline`.
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn notebook(&self) -> &Notebook {
        &self.nb
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    pub fn truncation_limit(&self) -> usize {
        self.truncation_limit
    }

    /// Runs code cells `1..=cell_num` in order, skipping markdown.
    pub fn replay_to_cell(&mut self, cell_num: usize) -> Result<Vec<Observation>, EnvError> {
        if cell_num < 1 || cell_num > self.nb.len() {
            return Err(NotebookError::CellOutOfRange { cell_num, len: self.nb.len() }.into());
        }
        (1..=cell_num).map(|n| self.execute_cell(n, String::new())).collect()
    }

    pub fn apply_action(&mut self, action: &AgentAction) -> Result<Observation, EnvError> {
        match action {
            AgentAction::CreateCell { source, position, comment } => {
                match self.nb.insert_cell(*position, source) {
                    Ok((nb, n)) => {
                        self.nb = nb;
                        let mut obs = self.execute_cell(n, comment.clone())?;
                        obs.action = action.clone();
                        obs.new_cell_num = Some(n);
                        Ok(obs)
                    }
                    Err(e) => Ok(self.invalid(action, e)),
                }
            }
            AgentAction::EditCell { cell_num, source, .. } => match self.nb.apply_edit(*cell_num, source) {
                Ok(nb) => {
                    self.nb = nb;
                    Ok(self.observation(action, String::new(), None))
                }
                Err(e) => Ok(self.invalid(action, e)),
            },
            AgentAction::ExecuteCell { cell_num, comment } => self.execute_cell(*cell_num, comment.clone()),
            AgentAction::Finish { .. } => Ok(self.observation(action, String::new(), None)),
        }
    }

    /// Executes the current source of `cell_num` and records its outputs.
    pub fn execute_cell(&mut self, cell_num: usize, comment: String) -> Result<Observation, EnvError> {
        let action = AgentAction::ExecuteCell { cell_num, comment };
        let Some(cell) = self.nb.cell(cell_num) else {
            let e = NotebookError::CellOutOfRange { cell_num, len: self.nb.len() };
            return Ok(self.invalid(&action, e));
        };
        if !cell.is_code() {
            return Ok(self.observation(&action, String::new(), None));
        }
        let source = cell.source.clone();
        let result = self.kernel.execute(&source, self.effective_timeout())?;
        self.exec_count += 1;
        self.nb.set_outputs(cell_num, to_outputs(&result, self.exec_count), Some(self.exec_count))?;
        Ok(self.observation(&action, merge_output(&result), result.ename.clone()))
    }

    fn effective_timeout(&self) -> Duration {
        match self.deadline {
            Some(d) => self.exec_timeout.min(d.saturating_duration_since(Instant::now())).max(Duration::from_millis(1)),
            None => self.exec_timeout,
        }
    }

    fn observation(&self, action: &AgentAction, text: String, ename: Option<String>) -> Observation {
        let (output_text, truncated) = truncate_output(&text, self.truncation_limit);
        Observation {
            action: action.clone(),
            output_text,
            is_error: ename.is_some(),
            truncated,
            new_cell_num: None,
            ename,
        }
    }

    fn invalid(&self, action: &AgentAction, e: NotebookError) -> Observation {
        let mut obs = self.observation(action, e.to_string(), None);
        obs.is_error = true;
        obs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_boundaries() {
        assert_eq!(truncate_output("0123456789", 4000), ("0123456789".to_string(), false));
        let exact = "x".repeat(4000);
        assert_eq!(truncate_output(&exact, 4000), (exact.clone(), false));
        let long: String = (0..10_000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let (cut, flag) = truncate_output(&long, 4000);
        assert!(flag);
        assert!(cut.contains(TRUNCATION_MARKER));
        assert_eq!(cut.chars().count(), 4000 + TRUNCATION_MARKER.chars().count());
        assert!(cut.starts_with(&long[..2000]) && cut.ends_with(&long[8000..]));
    }

    #[test]
    fn small_limits_are_clamped() {
        let (cut, flag) = truncate_output(&"y".repeat(100), 1);
        assert!(flag);
        assert_eq!(cut.chars().count(), 64 + TRUNCATION_MARKER.chars().count());
    }

    #[test]
    fn merge_order() {
        let r = ExecResult { stdout: "a".into(), stderr: "b\n".into(), result_repr: Some("3".into()), ..Default::default() };
        assert_eq!(merge_output(&r), "a\nb\n3");
        let e = ExecResult {
            stdout: "x\n".into(),
            result_repr: None,
            ename: Some("E".into()),
            traceback: Some("tb".into()),
            ..Default::default()
        };
        assert_eq!(merge_output(&e), "x\ntb");
    }
}
