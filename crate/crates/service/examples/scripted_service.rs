//! Starts the session service on a free port with a scripted model, submits
//! a bundled scenario over HTTP and prints the event stream and the result.
//!
//! `cargo run -p nbfix-service --example scripted_service`

use std::sync::Arc;

use nbfix_core::agent::ChatClient;
use nbfix_core::eval::{bundled_dir, load_scenario, reproduce, ScriptedClient};
use nbfix_core::env::Environment;
use nbfix_kernel::KernelSpec;
use nbfix_service::routes::router;
use nbfix_service::sessions::{ClientFactory, CreateSession, ServiceConfig, Sessions};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = load_scenario(&bundled_dir().join("name_error_missing_import.json"))?;

    // The traceback a user would paste in comes from running the notebook once.
    let dir = tempfile::tempdir()?;
    let mut env = Environment::start(scenario.notebook.clone(), &KernelSpec::Mini, dir.path())?;
    let err = reproduce(&mut env, scenario.failing_cell, &scenario.expected_ename)?;

    let script = scenario.script.clone();
    let factory: ClientFactory = Arc::new(move |_: &CreateSession| {
        ScriptedClient::new(script.clone()).map(|c| Box::new(c) as Box<dyn ChatClient>).map_err(|e| e.to_string())
    });
    let sessions = Sessions::new(ServiceConfig::new().with_client_factory(factory));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(sessions)).await });
    println!("service at {base}");

    let http = reqwest::Client::new();
    let body = json!({
        "notebook": scenario.notebook.serialize(),
        "cell_num": scenario.failing_cell,
        "traceback": err.traceback,
    });
    let created: Value = http.post(format!("{base}/v1/sessions")).json(&body).send().await?.json().await?;
    let id = created["id"].as_str().ok_or("no id")?;
    println!("session {id}");

    let mut events = http.get(format!("{base}/v1/sessions/{id}/events")).send().await?;
    let mut buf = String::new();
    while let Some(chunk) = events.chunk().await? {
        buf.push_str(&String::from_utf8_lossy(&chunk));
        while let Some(end) = buf.find('\n') {
            let line: String = buf.drain(..=end).collect();
            if let Some(data) = line.trim_end().strip_prefix("data: ") {
                let e: Value = serde_json::from_str(data)?;
                println!("  #{} {:<13} {}", e["seq"], e["kind"].as_str().unwrap_or(""), e["payload"]);
            }
        }
    }

    let result: Value = http.get(format!("{base}/v1/sessions/{id}/result")).send().await?.json().await?;
    println!(
        "{} in {} steps, {} prompt tokens, verified={}",
        result["status"], result["steps_taken"], result["usage"]["prompt_tokens"], result["verified"]
    );
    Ok(())
}
