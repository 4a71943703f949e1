//! Newline-delimited JSON protocol between an environment and a kernel process.
//!
//! One request line produces exactly one response line:
//!
//! ```text
//! {"op":"execute","code":"x = 1","timeout_s":120}
//!   -> {"stdout":"","stderr":"","result_repr":null,"ename":null,"evalue":null,"traceback":null,"duration_ms":3}
//! {"op":"reset"} -> {"ok":true}
//! {"op":"ping"}  -> {"ok":true,"version":"1"}
//! ```

use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{Kernel, KernelError};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ExecRequest {
    Execute { code: String, timeout_s: u64 },
    Reset,
    Ping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl Ack {
    pub fn ok() -> Self {
        Ack { ok: true, version: None, error: None }
    }

    pub fn version() -> Self {
        Ack { ok: true, version: Some(PROTOCOL_VERSION.to_string()), error: None }
    }

    fn error(msg: impl Into<String>) -> Self {
        Ack { ok: false, version: None, error: Some(msg.into()) }
    }
}

/// Serves the protocol over `input`/`output` until EOF, backed by `kernel`.
///
/// Malformed request lines get an `{"ok":false,"error":...}` response and the
/// loop continues.
pub fn serve_stdio<K, R, W>(kernel: &mut K, input: R, mut output: W) -> std::io::Result<()>
where
    K: Kernel + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<ExecRequest>(&line) {
            Ok(ExecRequest::Execute { code, timeout_s }) => {
                let timeout = Duration::from_secs(timeout_s.max(1));
                match kernel.execute(&code, timeout) {
                    Ok(result) => serde_json::to_string(&result),
                    Err(KernelError::EnvironmentDown(e)) => serde_json::to_string(&Ack::error(e)),
                }
            }
            Ok(ExecRequest::Reset) => match kernel.reset() {
                Ok(()) => serde_json::to_string(&Ack::ok()),
                Err(KernelError::EnvironmentDown(e)) => serde_json::to_string(&Ack::error(e)),
            },
            Ok(ExecRequest::Ping) => serde_json::to_string(&Ack::version()),
            Err(e) => serde_json::to_string(&Ack::error(format!("bad request: {e}"))),
        }
        .expect("protocol types always serialize");
        writeln!(output, "{response}")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ExecResult;

    #[test]
    fn request_wire_format_is_exact() {
        let req = ExecRequest::Execute { code: "x = 1".into(), timeout_s: 120 };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"op":"execute","code":"x = 1","timeout_s":120}"#
        );
        assert_eq!(serde_json::to_string(&ExecRequest::Reset).unwrap(), r#"{"op":"reset"}"#);
        assert_eq!(serde_json::to_string(&ExecRequest::Ping).unwrap(), r#"{"op":"ping"}"#);
    }

    #[test]
    fn response_wire_format_is_exact() {
        let result = ExecResult { duration_ms: 3, ..Default::default() };
        assert_eq!(
            serde_json::to_string(&result).unwrap(),
            r#"{"stdout":"","stderr":"","result_repr":null,"ename":null,"evalue":null,"traceback":null,"duration_ms":3}"#
        );
        assert_eq!(serde_json::to_string(&Ack::ok()).unwrap(), r#"{"ok":true}"#);
        assert_eq!(serde_json::to_string(&Ack::version()).unwrap(), r#"{"ok":true,"version":"1"}"#);
    }

    #[test]
    fn serve_answers_each_line() {
        let mut kernel = crate::MiniKernel::new(std::env::temp_dir()).unwrap();
        let input = concat!(
            r#"{"op":"ping"}"#, "\n",
            r#"{"op":"execute","code":"x = 5","timeout_s":5}"#, "\n",
            "garbage\n",
            r#"{"op":"execute","code":"print(x)","timeout_s":5}"#, "\n",
            r#"{"op":"reset"}"#, "\n",
        );
        let mut out = Vec::new();
        serve_stdio(&mut kernel, input.as_bytes(), &mut out).unwrap();
        let lines: Vec<serde_json::Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0]["version"], "1");
        assert!(lines[1]["ename"].is_null());
        assert_eq!(lines[2]["ok"], false);
        assert_eq!(lines[3]["stdout"], "5\n");
        assert_eq!(lines[4]["ok"], true);
    }
}
