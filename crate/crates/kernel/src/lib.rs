//! Execution kernels for notebook cells.
//!
//! A [`Kernel`] is a persistent interpreter that runs snippets of code one at a
//! time and keeps its namespace between calls, the way a notebook runtime does.
//! Two implementations are provided:
//!
//! - [`MiniKernel`]: an in-process interpreter for a Python subset. It needs no
//!   external runtime, which makes it the default for tests and scripted
//!   evaluation runs.
//! - [`SidecarKernel`]: a client for an out-of-process interpreter speaking the
//!   newline-delimited JSON protocol in [`protocol`].
//!
//! Neither kernel is a sandbox. Code (and `!` shell lines) run with the
//! privileges of the host process.

pub mod mini;
pub mod protocol;
mod sidecar;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use mini::MiniKernel;
pub use protocol::{serve_stdio, ExecRequest, PROTOCOL_VERSION};
pub use sidecar::SidecarKernel;

/// Default per-cell execution timeout.
pub const DEFAULT_EXEC_TIMEOUT: Duration = Duration::from_secs(120);

/// Exception name reported when a cell exceeds its execution timeout.
pub const TIMEOUT_ENAME: &str = "ExecutionTimeout";

/// Outcome of running one snippet.
///
/// `ename` and `traceback` are either both present or both absent, and
/// `result_repr` is absent whenever an exception was raised.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    pub stdout: String,
    pub stderr: String,
    pub result_repr: Option<String>,
    pub ename: Option<String>,
    pub evalue: Option<String>,
    pub traceback: Option<String>,
    pub duration_ms: u64,
}

impl ExecResult {
    pub fn is_error(&self) -> bool {
        self.ename.is_some()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    /// The interpreter process or thread is gone, or the transport broke.
    #[error("environment down: {0}")]
    EnvironmentDown(String),
}

/// A stateful interpreter. One request at a time; callers serialize access.
pub trait Kernel: Send {
    fn execute(&mut self, code: &str, timeout: Duration) -> Result<ExecResult, KernelError>;

    /// Clears the namespace while keeping the interpreter alive.
    fn reset(&mut self) -> Result<(), KernelError>;

    /// Returns the protocol version.
    fn ping(&mut self) -> Result<String, KernelError>;
}

impl Kernel for Box<dyn Kernel> {
    fn execute(&mut self, code: &str, timeout: Duration) -> Result<ExecResult, KernelError> {
        (**self).execute(code, timeout)
    }

    fn reset(&mut self) -> Result<(), KernelError> {
        (**self).reset()
    }

    fn ping(&mut self) -> Result<String, KernelError> {
        (**self).ping()
    }
}

/// How to obtain a kernel for a fresh environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KernelSpec {
    /// In-process [`MiniKernel`].
    Mini,
    /// External process speaking the stdio protocol.
    Sidecar { program: PathBuf, args: Vec<String> },
}

impl KernelSpec {
    /// Starts a kernel whose working directory is `workdir`.
    pub fn start(&self, workdir: PathBuf) -> Result<Box<dyn Kernel>, KernelError> {
        match self {
            KernelSpec::Mini => Ok(Box::new(MiniKernel::new(workdir)?)),
            KernelSpec::Sidecar { program, args } => {
                Ok(Box::new(SidecarKernel::spawn(program, args, &workdir)?))
            }
        }
    }
}
