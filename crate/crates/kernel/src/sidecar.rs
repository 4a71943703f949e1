use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;

use crate::protocol::{Ack, ExecRequest, PROTOCOL_VERSION};
use crate::{ExecResult, Kernel, KernelError};

/// Extra time granted on top of the per-cell timeout before the transport is
/// declared dead.
const RESPONSE_GRACE: Duration = Duration::from_secs(5);
const CONTROL_TIMEOUT: Duration = Duration::from_secs(10);

/// Client for a kernel running in a child process.
pub struct SidecarKernel {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl SidecarKernel {
    /// Spawns `program args...` in `workdir` and performs the ping handshake.
    pub fn spawn(program: &Path, args: &[String], workdir: &Path) -> Result<Self, KernelError> {
        let mut child = Command::new(program)
            .args(args)
            .current_dir(workdir)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| KernelError::EnvironmentDown(format!("spawn {}: {e}", program.display())))?;

        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("sidecar-reader".into())
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    let stop = line.is_err();
                    if tx.send(line).is_err() || stop {
                        break;
                    }
                }
            })
            .map_err(|e| KernelError::EnvironmentDown(e.to_string()))?;

        let mut kernel = SidecarKernel { child, stdin, lines: rx };
        let version = kernel.ping()?;
        if version != PROTOCOL_VERSION {
            return Err(KernelError::EnvironmentDown(format!(
                "sidecar speaks protocol {version}, expected {PROTOCOL_VERSION}"
            )));
        }
        Ok(kernel)
    }

    /// Kills the child process; subsequent requests fail with `EnvironmentDown`.
    pub fn kill(&mut self) -> std::io::Result<()> {
        self.child.kill()?;
        self.child.wait().map(|_| ())
    }

    fn roundtrip<T: DeserializeOwned>(
        &mut self,
        request: &ExecRequest,
        wait: Duration,
    ) -> Result<T, KernelError> {
        let line = serde_json::to_string(request).expect("requests always serialize");
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| KernelError::EnvironmentDown("stdin closed".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| KernelError::EnvironmentDown(format!("write: {e}")))?;

        let response = match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(KernelError::EnvironmentDown(format!("read: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                return Err(KernelError::EnvironmentDown("sidecar stopped responding".into()));
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(KernelError::EnvironmentDown("sidecar exited".into()))
            }
        };
        if let Ok(ack) = serde_json::from_str::<Ack>(&response) {
            if !ack.ok {
                return Err(KernelError::EnvironmentDown(
                    ack.error.unwrap_or_else(|| "sidecar reported failure".into()),
                ));
            }
        }
        serde_json::from_str(&response)
            .map_err(|e| KernelError::EnvironmentDown(format!("bad response {response:?}: {e}")))
    }
}

impl Kernel for SidecarKernel {
    fn execute(&mut self, code: &str, timeout: Duration) -> Result<ExecResult, KernelError> {
        let timeout_s = timeout.as_secs_f64().ceil().max(1.0) as u64;
        let request = ExecRequest::Execute { code: code.to_string(), timeout_s };
        self.roundtrip(&request, Duration::from_secs(timeout_s) + RESPONSE_GRACE)
    }

    fn reset(&mut self) -> Result<(), KernelError> {
        self.roundtrip::<Ack>(&ExecRequest::Reset, CONTROL_TIMEOUT).map(|_| ())
    }

    fn ping(&mut self) -> Result<String, KernelError> {
        let ack: Ack = self.roundtrip(&ExecRequest::Ping, CONTROL_TIMEOUT)?;
        ack.version
            .ok_or_else(|| KernelError::EnvironmentDown("ping response without version".into()))
    }
}

impl Drop for SidecarKernel {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved sidecar exit on EOF.
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
