//! Feeds newline-delimited JSON requests to `serve_stdio` and prints the replies.
//!
//! Run with `cargo run -p nbfix-kernel --example stdio_protocol`.

use nbfix_kernel::{serve_stdio, ExecRequest, MiniKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut kernel = MiniKernel::new(dir.path().to_path_buf())?;
    let requests = [
        ExecRequest::Ping,
        ExecRequest::Execute { code: "x = 1".into(), timeout_s: 120 },
        ExecRequest::Execute { code: "print(x + 1)".into(), timeout_s: 120 },
        ExecRequest::Reset,
        ExecRequest::Execute { code: "x".into(), timeout_s: 120 },
    ];
    let mut input = String::new();
    for r in &requests {
        input.push_str(&serde_json::to_string(r)?);
        input.push('\n');
    }
    let mut output = Vec::new();
    serve_stdio(&mut kernel, input.as_bytes(), &mut output)?;
    for (req, resp) in input.lines().zip(String::from_utf8(output)?.lines()) {
        println!("-> {req}\n<- {resp}");
    }
    Ok(())
}
