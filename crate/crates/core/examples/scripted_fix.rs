//! Repairs a NameError with a scripted model and prints the session as it runs.

use nbfix_core::agent::{action_to_call, run_session, AgentConfig, ChatMessage, SessionEvent, SessionObserver};
use nbfix_core::env::{AgentAction, Environment};
use nbfix_core::eval::{reproduce, ScriptedClient};
use nbfix_core::notebook::{Cell, Notebook};
use nbfix_kernel::KernelSpec;

struct Printer;

impl SessionObserver for Printer {
    fn on_event(&mut self, event: &SessionEvent) {
        match event {
            SessionEvent::Action { step, action } => println!("[{step}] {} ({})", action.tool_name(), action.comment()),
            SessionEvent::Observation { observation, .. } => println!("    -> {:?}", observation.output_text),
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let nb = Notebook::from_cells([
        Cell::markdown("# Circle"),
        Cell::code("radius = 2"),
        Cell::code("print(math.pi * radius ** 2)"),
    ]);
    let dir = tempfile::tempdir()?;
    let mut env = Environment::start(nb, &KernelSpec::Mini, dir.path())?;
    let err = reproduce(&mut env, 3, "NameError")?;
    println!("failing cell {}:\n{}\n", err.cell_num, err.traceback);

    let script = [
        AgentAction::CreateCell { source: "import math".into(), position: None, comment: "math is not imported".into() },
        AgentAction::Finish { comment: "math is available now".into() },
    ]
    .iter()
    .enumerate()
    .map(|(i, a)| ChatMessage::assistant_call(action_to_call(a, format!("call_{i}"))))
    .collect();
    let mut client = ScriptedClient::new(script)?;
    let result = run_session(&mut env, &err, &mut client, &AgentConfig::default(), &mut Printer);

    println!("\nstatus: {} after {} steps", result.status.as_str(), result.steps_taken);
    println!("prompt tokens per call: {:?}", result.usage.iter().map(|u| u.prompt_tokens).collect::<Vec<_>>());
    for cell in result.final_notebook.cells() {
        println!("--- cell {} ---\n{}", cell.index(), cell.source);
    }
    Ok(())
}
