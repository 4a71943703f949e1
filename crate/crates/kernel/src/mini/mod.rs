//! In-process interpreter for a Python subset.
//!
//! Supported: expressions, assignment and unpacking, `if`/`for`/`while`,
//! `def` and `lambda`, `try`/`except`/`finally`, `with`, `import`, list and
//! dict comprehensions, f-strings, slicing, `!shell` lines, and the modules
//! `math`, `os`, `os.path`, `json`, `time`, `csv` and `sys`. Classes, sets,
//! generators and third-party packages are not supported; importing one
//! raises `ModuleNotFoundError` as it would in a bare environment.

mod ast;
mod builtins;
mod format;
mod interp;
mod lexer;
mod methods;
mod modules;
mod parser;
mod value;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::{ExecResult, Kernel, KernelError, PROTOCOL_VERSION};

pub use parser::parse_module;

const WORKER_STACK: usize = 64 * 1024 * 1024;

enum Request {
    Execute(String, Duration),
    Reset,
}

/// Runs cells on a dedicated thread so that interpreter state never crosses
/// threads and deep recursion has room.
pub struct MiniKernel {
    requests: Option<Sender<Request>>,
    replies: Receiver<ExecResult>,
    worker: Option<JoinHandle<()>>,
}

impl MiniKernel {
    /// Relative paths in executed code resolve against `workdir`.
    pub fn new(workdir: PathBuf) -> Result<Self, KernelError> {
        let (req_tx, req_rx) = mpsc::channel::<Request>();
        let (rep_tx, rep_rx) = mpsc::channel();
        let worker = thread::Builder::new()
            .name("mini-kernel".into())
            .stack_size(WORKER_STACK)
            .spawn(move || {
                let mut interp = interp::Interp::new(workdir);
                for req in req_rx {
                    let reply = match req {
                        Request::Execute(code, timeout) => {
                            match panic::catch_unwind(AssertUnwindSafe(|| interp.run_cell(&code, timeout))) {
                                Ok(r) => r,
                                Err(_) => {
                                    interp.reset();
                                    ExecResult {
                                        ename: Some("SystemError".into()),
                                        evalue: Some("internal interpreter failure; namespace was reset".into()),
                                        traceback: Some(
                                            "SystemError: internal interpreter failure; namespace was reset".into(),
                                        ),
                                        ..Default::default()
                                    }
                                }
                            }
                        }
                        Request::Reset => {
                            interp.reset();
                            ExecResult::default()
                        }
                    };
                    if rep_tx.send(reply).is_err() {
                        break;
                    }
                }
            })
            .map_err(|e| KernelError::EnvironmentDown(format!("cannot start interpreter thread: {e}")))?;
        Ok(MiniKernel { requests: Some(req_tx), replies: rep_rx, worker: Some(worker) })
    }

    fn roundtrip(&mut self, req: Request) -> Result<ExecResult, KernelError> {
        let down = || KernelError::EnvironmentDown("interpreter thread exited".into());
        self.requests.as_ref().ok_or_else(down)?.send(req).map_err(|_| down())?;
        self.replies.recv().map_err(|_| down())
    }
}

impl Kernel for MiniKernel {
    fn execute(&mut self, code: &str, timeout: Duration) -> Result<ExecResult, KernelError> {
        self.roundtrip(Request::Execute(code.to_string(), timeout))
    }

    fn reset(&mut self) -> Result<(), KernelError> {
        self.roundtrip(Request::Reset).map(|_| ())
    }

    fn ping(&mut self) -> Result<String, KernelError> {
        Ok(PROTOCOL_VERSION.to_string())
    }
}

impl Drop for MiniKernel {
    fn drop(&mut self) {
        self.requests.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
