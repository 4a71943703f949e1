//! Fixes a notebook cell with a real chat-completions endpoint.
//!
//! ```text
//! AGENT_LLM_BASE_URL=https://api.openai.com/v1 AGENT_LLM_API_KEY=... \
//!   cargo run -p nbfix-core --example live_fix -- notebook.ipynb 3
//! ```

use nbfix_core::agent::{run_session, AgentConfig, HttpChatClient, NoopObserver};
use nbfix_core::env::Environment;
use nbfix_core::notebook::Notebook;
use nbfix_kernel::KernelSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let (Some(path), Some(cell)) = (args.next(), args.next()) else {
        eprintln!("usage: live_fix NOTEBOOK CELL_NUM");
        std::process::exit(2);
    };
    let cell: usize = cell.parse()?;
    let nb = Notebook::parse(&std::fs::read_to_string(&path)?)?;
    let workdir = std::path::Path::new(&path).parent().unwrap_or(".".as_ref()).canonicalize()?;
    let mut env = Environment::start(nb, &KernelSpec::Mini, &workdir)?;
    let obs = env.replay_to_cell(cell)?;
    if !obs.last().is_some_and(|o| o.is_error) {
        println!("cell {cell} runs without an error");
        return Ok(());
    }
    let err = nbfix_core::eval::error_context(env.notebook(), cell).ok_or("no error output")?;
    let mut client = HttpChatClient::from_env()?;
    let result = run_session(&mut env, &err, &mut client, &AgentConfig::default(), &mut NoopObserver);
    println!("{} in {} steps", result.status.as_str(), result.steps_taken);
    print!("{}", result.final_notebook.cell(cell).map(|c| c.source.as_str()).unwrap_or_default());
    Ok(())
}
