//! The `nbfix` command line.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nbfix_core::agent::{
    run_session, ChatClient, HttpChatClient, SessionEvent, SessionObserver, SessionRecord, Strategy,
};
use nbfix_core::cost::{summarize, PricingTable};
use nbfix_core::env::Environment;
use nbfix_core::eval::{error_context, load_dir, load_scenario, run_eval, run_scenario, EvalOptions, ScriptedClient};
use nbfix_core::notebook::Notebook;
use nbfix_kernel::{serve_stdio, KernelSpec, MiniKernel};

use crate::routes::serve;
use crate::sessions::{ClientFactory, CreateSession, ServiceConfig, Sessions};

type Error = Box<dyn std::error::Error + Send + Sync>;

#[derive(Parser, Debug)]
#[command(name = "nbfix", version, about = "Repair failing notebook cells with a tool-using agent")]
pub struct Cli {
    /// Run cells in an external kernel process instead of the built-in one.
    #[arg(long, global = true, value_name = "PROGRAM")]
    sidecar: Option<PathBuf>,
    /// Argument passed to the sidecar program. Repeatable.
    #[arg(long = "sidecar-arg", global = true, allow_hyphen_values = true)]
    sidecar_args: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Start the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Answer every session with the script of this scenario file.
        #[arg(long, value_name = "SCENARIO")]
        scripted: Option<PathBuf>,
    },
    /// Fix one notebook cell and write the repaired notebook.
    Fix {
        #[arg(long)]
        notebook: PathBuf,
        #[arg(long)]
        cell: usize,
        /// Use the script of this scenario file instead of a live model.
        #[arg(long, value_name = "SCENARIO")]
        scripted: Option<PathBuf>,
        /// Defaults to `<name>.fixed.ipynb` next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scenario file and print its outcome.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's strategy.
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Write the session record here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Build cost reports from a directory of session records.
    Report {
        #[arg(long)]
        transcripts: PathBuf,
        #[arg(long)]
        pricing: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario in a directory.
    Eval {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        pricing: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strategy: Option<Strategy>,
    },
    /// Serve the kernel stdio protocol in the current directory.
    Sidecar,
}

impl Cli {
    fn kernel(&self) -> KernelSpec {
        match &self.sidecar {
            Some(program) => KernelSpec::Sidecar { program: program.clone(), args: self.sidecar_args.clone() },
            None => KernelSpec::Mini,
        }
    }
}

/// Prints events as JSON lines on stderr.
struct Printer;

impl SessionObserver for Printer {
    fn on_event(&mut self, event: &SessionEvent) {
        if let Ok(line) = serde_json::to_string(event) {
            eprintln!("{line}");
        }
    }
}

fn scripted_client(path: &Path) -> Result<ScriptedClient, Error> {
    let scenario = load_scenario(path)?;
    Ok(ScriptedClient::new(scenario.script)?)
}

pub fn run(cli: Cli) -> Result<(), Error> {
    let kernel = cli.kernel();
    match cli.command {
        Command::Serve { port, host, scripted } => {
            let mut cfg = ServiceConfig::new().with_env()?;
            cfg.kernel = kernel;
            if let Some(path) = scripted {
                let script = load_scenario(&path)?.script;
                let factory: ClientFactory = Arc::new(move |_: &CreateSession| {
                    ScriptedClient::new(script.clone()).map(|c| Box::new(c) as Box<dyn ChatClient>).map_err(|e| e.to_string())
                });
                cfg = cfg.with_client_factory(factory);
            }
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                serve(listener, Sessions::new(cfg)).await
            })?;
        }
        Command::Fix { notebook, cell, scripted, out } => {
            let nb = Notebook::parse(&std::fs::read_to_string(&notebook)?)?;
            let workdir = match notebook.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let mut env = Environment::start(nb, &kernel, &workdir)?;
            env.replay_to_cell(cell)?;
            let err = error_context(env.notebook(), cell).ok_or_else(|| format!("cell {cell} did not raise"))?;
            let mut client: Box<dyn ChatClient> = match scripted {
                Some(path) => Box::new(scripted_client(&path)?),
                None => Box::new(HttpChatClient::from_env()?),
            };
            let result = run_session(&mut env, &err, &mut client, &Default::default(), &mut Printer);
            let out = out.unwrap_or_else(|| notebook.with_extension("fixed.ipynb"));
            std::fs::write(&out, result.final_notebook.serialize())?;
            println!("{} after {} steps, wrote {}", result.status.as_str(), result.steps_taken, out.display());
            if let Some(e) = result.error {
                println!("error: {e}");
            }
        }
        Command::Replay { scenario, strategy, transcript } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(st) = strategy {
                s.strategy = st;
            }
            let mut opts = EvalOptions::new(PricingTable::new(Default::default(), Default::default())?);
            opts.kernel = kernel;
            let result = run_scenario(&s, &opts)?;
            println!(
                "{} {} {} steps={} prompt_tokens={} completion_tokens={} hack_flags={:?}",
                s.name,
                s.strategy.as_str(),
                result.status.as_str(),
                result.steps_taken,
                result.prompt_tokens(),
                result.completion_tokens(),
                result.hack_report.flags()
            );
            if let Some(path) = transcript {
                let record = SessionRecord { session_id: s.name.clone(), result };
                std::fs::write(path, serde_json::to_string_pretty(&record)? + "\n")?;
            }
        }
        Command::Report { transcripts, pricing, out } => {
            let pricing = PricingTable::load(&pricing)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&transcripts)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
            paths.sort();
            let mut records = Vec::new();
            for p in paths {
                let text = std::fs::read_to_string(&p)?;
                let record: SessionRecord =
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                records.push(record);
            }
            let summary = summarize(&records, &pricing)?;
            print!("{}", summary.costs_csv()?);
            println!("mean cost: {} {}", summary.mean_cost, summary.currency);
            if let Some(dir) = out {
                summary.write_reports(&dir)?;
            }
        }
        Command::Eval { dir, pricing, out, strategy } => {
            let mut opts = EvalOptions::new(PricingTable::load(&pricing)?);
            opts.kernel = kernel;
            let scenarios = load_dir(&dir)?;
            let run = run_eval(&scenarios, strategy, &opts);
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("report.json"), run.report.to_json())?;
            if !run.records.is_empty() {
                summarize(&run.records, &opts.pricing)?.write_reports(&out)?;
            }
            let transcripts = out.join("transcripts");
            std::fs::create_dir_all(&transcripts)?;
            for r in &run.records {
                std::fs::write(transcripts.join(format!("{}.json", r.session_id)), serde_json::to_string_pretty(r)? + "\n")?;
            }
            println!(
                "resolved {}/{} ({:.3}), hacked {}, histogram {:?}",
                run.report.resolved, run.report.valid, run.report.resolved_rate, run.report.hacked, run.report.steps_histogram
            );
        }
        Command::Sidecar => {
            let mut k = MiniKernel::new(std::env::current_dir()?)?;
            serve_stdio(&mut k, std::io::stdin().lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}

/// Entry point of the `nbfix` binary.
pub fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nbfix: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
