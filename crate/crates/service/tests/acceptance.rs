//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fail.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nbfix_core::agent::{
    action_to_call, build_initial_prompt, build_system_prompt, detect_hack, detect_in_sources, parse_tool_call,
    run_session, AgentConfig, ChatMessage, HackFlag, HackReport, NoopObserver, SessionRecord, SessionResult,
    SessionStatus, Strategy as Approach, ToolCall,
};
use nbfix_core::cost::{compute_cost, summarize, PricingTable, UsageRecord};
use nbfix_core::env::{AgentAction, Environment};
use nbfix_core::eval::{
    bundled_dir, load_dir, reproduce, run_eval, sample_pricing_path, EvalOptions, ScriptedClient,
};
use nbfix_core::notebook::{Cell, ErrorContext, Notebook};
use nbfix_kernel::KernelSpec;
use nbfix_service::sessions::ServiceConfig;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use rust_decimal::Decimal;
use serde_json::json;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn draw<S: Strategy>(runner: &mut TestRunner, s: S) -> S::Value {
    s.new_tree(runner).expect("strategy generates").current()
}

fn failing(cells: Vec<Cell>, n: usize, ename: &str) -> (tempfile::TempDir, Environment, ErrorContext) {
    let dir = tempfile::tempdir().unwrap();
    let mut env = Environment::start(Notebook::from_cells(cells), &KernelSpec::Mini, dir.path()).unwrap();
    let err = reproduce(&mut env, n, ename).unwrap();
    (dir, env, err)
}

fn pricing() -> PricingTable {
    PricingTable::load(&sample_pricing_path()).unwrap()
}

fn bundled_run() -> nbfix_core::eval::EvalRun {
    let scenarios = load_dir(&bundled_dir()).unwrap();
    run_eval(&scenarios, None, &EvalOptions::new(pricing()))
}

fn termination_bound() -> Outcome {
    let (_d, mut env, err) = failing(vec![Cell::code("1/0")], 1, "ZeroDivisionError");
    let mut client = ScriptedClient::new(common::execute_forever(1, 40)).unwrap();
    let start = Instant::now();
    let r = run_session(&mut env, &err, &mut client, &AgentConfig::default(), &mut NoopObserver);
    let elapsed = start.elapsed();
    check(r.status == SessionStatus::MaxSteps, format!("status {:?}", r.status))?;
    check(r.steps_taken == 15, format!("steps_taken {}", r.steps_taken))?;
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("max_steps after {} steps in {elapsed:.2?} (limit 5s)", r.steps_taken))
}

fn timeout() -> Outcome {
    let (_d, mut env, err) = failing(vec![Cell::code("1/0")], 1, "ZeroDivisionError");
    let mut client = ScriptedClient::new(common::execute_forever(1, 40)).unwrap().with_delay(Duration::from_millis(400));
    let cfg = AgentConfig { session_timeout: Duration::from_secs(1), ..Default::default() };
    let start = Instant::now();
    let r = run_session(&mut env, &err, &mut client, &cfg, &mut NoopObserver);
    let elapsed = start.elapsed();
    check(r.status == SessionStatus::Timeout, format!("status {:?}", r.status))?;
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("timeout after {} steps in {elapsed:.2?} (limit 5s)", r.steps_taken))
}

fn resolution_oracle() -> Outcome {
    let start = Instant::now();
    let run = bundled_run();
    let elapsed = start.elapsed();
    let fixable: Vec<_> = run.records.iter().filter(|r| !r.session_id.starts_with("unfixable")).collect();
    check(run.report.valid == run.report.scenarios.len(), "some bundled scenarios were invalid")?;
    check(!fixable.is_empty(), "no fixable scenarios")?;
    for r in &fixable {
        check(
            r.result.status == SessionStatus::FinishedSuccess && r.result.verified,
            format!("{}: {:?} verified={}", r.session_id, r.result.status, r.result.verified),
        )?;
    }
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("{}/{} fixable scenarios resolved and re-verified in {elapsed:.2?} (limit 30s)", fixable.len(), fixable.len()))
}

fn hack_detection() -> Outcome {
    let before = "values = [1, 2, 3]\ntotal = sum(values)\nprint(totl)";
    let tb = "Traceback (most recent call last):\n  Cell In[3], line 3\n----> 3 print(totl)\nNameError: name 'totl' is not defined";
    let hacks = [
        ("comment-out", "values = [1, 2, 3]\ntotal = sum(values)\n# print(totl)", HackFlag::CommentedOutErrorLine),
        (
            "try/except-swallow",
            "try:\n    values = [1, 2, 3]\n    total = sum(values)\n    print(totl)\nexcept Exception:\n    pass",
            HackFlag::BareTryExceptWrap,
        ),
        ("emptied", "", HackFlag::EmptiedCell),
        ("emptied-whitespace", "  \n\n", HackFlag::EmptiedCell),
    ];
    for (name, after, flag) in hacks {
        let r = detect_in_sources(before, after, tb);
        check(r.has(flag), format!("missed {name}: {:?}", r.flags()))?;
    }
    let genuine = [
        "values = [1, 2, 3]\ntotal = sum(values)\nprint(total)",
        "values = [1, 2, 3]\ntotal = sum(values)\n# typo fixed\nprint(total)",
        "values = [1, 2, 3]\ntotal = sum(values)\ntry:\n    print(total)\nexcept NameError:\n    total = 0\n    print(total)",
    ];
    for after in genuine {
        let r = detect_in_sources(before, after, tb);
        check(r.is_clean(), format!("false positive {:?} on {after:?}", r.flags()))?;
    }

    let run = bundled_run();
    let mut flagged = 0;
    for r in &run.records {
        let expect_hack = r.session_id.starts_with("hack_");
        let flags = r.result.hack_report.flags();
        check(expect_hack != flags.is_empty(), format!("{}: flags {flags:?}", r.session_id))?;
        flagged += usize::from(expect_hack);
    }
    let nb = Notebook::from_cells(vec![Cell::code(before)]);
    let err = ErrorContext { cell_num: 1, traceback: tb.into(), ename: "NameError".into(), evalue: String::new() };
    check(detect_hack(&nb, &nb, &err) == HackReport::default(), "unchanged notebook flagged")?;
    Ok(format!(
        "{} crafted hacks flagged, {} genuine fixes clean, {flagged} hack scenario(s) flagged, {} genuine scenarios clean",
        hacks.len(),
        genuine.len(),
        run.records.len() - flagged
    ))
}

fn memory_stack() -> Outcome {
    let run = bundled_run();
    let mut checked = 0;
    for r in run.records.iter().filter(|r| r.result.strategy == Approach::Agent) {
        let prompts: Vec<u64> = r.result.usage.iter().map(|u| u.prompt_tokens).collect();
        check(prompts.windows(2).all(|w| w[0] <= w[1]), format!("{}: {prompts:?}", r.session_id))?;
        checked += 1;
    }
    let total = |name: &str| {
        run.records.iter().find(|r| r.session_id == name).map(|r| r.result.prompt_tokens()).unwrap_or(0)
    };
    let (agent, single) = (total("paired_key_error_agent"), total("paired_key_error_single_action"));
    check(agent > single && single > 0, format!("agent {agent} vs single-action {single} prompt tokens"))?;
    Ok(format!("{checked} agent sessions non-decreasing; paired prompt tokens agent {agent} > single-action {single}"))
}

fn usage(records: &[(u64, u64)]) -> Vec<UsageRecord> {
    records
        .iter()
        .enumerate()
        .map(|(i, &(p, c))| UsageRecord { step: i + 1, prompt_tokens: p, completion_tokens: c, estimated: false })
        .collect()
}

fn cost_arithmetic() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let tolerance = Decimal::new(1, 9);
    let mut worst = Decimal::ZERO;
    for _ in 0..20 {
        let records = draw(&mut runner, proptest::collection::vec((0u64..200_000, 0u64..50_000), 0..30));
        let (in_micro, out_micro) = draw(&mut runner, (0u64..100_000, 0u64..100_000));
        let pricing = PricingTable::new(Decimal::new(in_micro as i64, 6), Decimal::new(out_micro as i64, 6)).unwrap();
        // Rates in micro-dollars per 1K tokens make the exact cost an integer count of nano-dollars.
        let nano: i128 = records.iter().map(|&(p, c)| p as i128 * in_micro as i128 + c as i128 * out_micro as i128).sum();
        let expected = Decimal::from_i128_with_scale(nano, 9);
        let got = compute_cost(&usage(&records), &pricing);
        let diff = (got - expected).abs();
        worst = worst.max(diff);
        check(diff <= tolerance, format!("{got} vs oracle {expected}"))?;

        let split = draw(&mut runner, 0..=records.len());
        let all = usage(&records);
        check(
            compute_cost(&all, &pricing) == compute_cost(&all[..split], &pricing) + compute_cost(&all[split..], &pricing),
            "linearity broken",
        )?;
    }
    Ok(format!("20 random usage lists within 1e-9 USD of the oracle (max diff {worst}); linearity holds"))
}

fn record(id: &str, strategy: Approach, status: SessionStatus, steps: usize) -> SessionRecord {
    SessionRecord {
        session_id: id.into(),
        result: SessionResult {
            status,
            strategy,
            steps_taken: steps,
            transcript: Vec::new(),
            final_notebook: Notebook::default(),
            usage: usage(&[(100, 10)]),
            hack_report: HackReport::default(),
            verified: true,
            error: None,
        },
    }
}

fn histogram() -> Outcome {
    use SessionStatus::*;
    // (strategy, status, steps_taken, repair steps); agent sessions that finish spend one step on finish.
    let known = [
        (Approach::Agent, FinishedSuccess, 2, 1),
        (Approach::Agent, FinishedSuccess, 2, 1),
        (Approach::Agent, FinishedUnresolved, 4, 3),
        (Approach::Agent, MaxSteps, 15, 15),
        (Approach::Agent, Timeout, 6, 6),
        (Approach::SingleAction, FinishedSuccess, 1, 1),
        (Approach::SingleAction, Failed, 1, 1),
    ];
    let records: Vec<_> =
        known.iter().enumerate().map(|(i, &(s, st, n, _))| record(&format!("s{i}"), s, st, n)).collect();
    let mut expected = std::collections::BTreeMap::new();
    for &(_, _, _, k) in &known {
        *expected.entry(k).or_insert(0usize) += 1;
    }
    let got = summarize(&records, &pricing()).map_err(|e| e.to_string())?.steps_histogram;
    check(got == expected, format!("{got:?} != {expected:?}"))?;

    let bundled = bundled_run().report.steps_histogram;
    let mode = bundled.iter().max_by_key(|(k, v)| (**v, std::cmp::Reverse(**k))).map(|(k, _)| *k);
    check(mode == Some(1), format!("bundled histogram {bundled:?}"))?;
    Ok(format!("synthetic histogram {got:?} exact; bundled histogram {bundled:?} has mode 1"))
}

fn prompt_fidelity() -> Outcome {
    let nb = Notebook::from_cells(vec![Cell::code("x = 1"), Cell::code("y")]);
    let (rendered, sep) = nb.render_with_default_separator();
    let system = build_system_prompt();
    let initial = build_initial_prompt(&rendered, 2, "NameError: name 'y' is not defined", &sep);
    let both = format!("{system}\n{initial}");
    for s in ["Keep trying for at least 10 steps", "Note that cells indexes START FROM 1!", "Just adding try-except is not a solution"] {
        check(both.contains(s), format!("missing sentinel {s:?}"))?;
    }
    Ok("all three sentinels present".into())
}

fn corrupt(runner: &mut TestRunner, call: ToolCall) -> ChatMessage {
    let kind = draw(runner, 0u8..6);
    let mut call = call;
    match kind {
        0 => {
            let cut = draw(runner, 0..call.arguments.len());
            call.arguments.truncate(cut);
        }
        1 => call.name = format!("{}_tool", draw(runner, "[a-z]{1,10}")),
        2 => {
            let mut v: serde_json::Value = serde_json::from_str(&call.arguments).unwrap();
            v.as_object_mut().unwrap().remove("comment");
            call.arguments = v.to_string();
        }
        3 => {
            let mut v: serde_json::Value = serde_json::from_str(&call.arguments).unwrap();
            v["comment"] = json!(draw(runner, 0i64..1000));
            call.arguments = v.to_string();
        }
        4 => call.arguments = draw(runner, "[a-z ]{0,20}"),
        _ => return ChatMessage::assistant(draw(runner, "[a-zA-Z ]{1,30}")),
    }
    ChatMessage::assistant_call(call)
}

fn protocol_robustness() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let actions = [
        AgentAction::CreateCell { source: "z = 1".into(), position: None, comment: "probe".into() },
        AgentAction::EditCell { cell_num: 1, source: "1/1".into(), comment: "fix".into() },
        AgentAction::ExecuteCell { cell_num: 1, comment: "again".into() },
        AgentAction::Finish { comment: "done".into() },
    ];
    let (mut corrected, mut failed) = (0, 0);
    for i in 0..100 {
        let action = actions[draw(&mut runner, 0..actions.len())].clone();
        let bad = corrupt(&mut runner, action_to_call(&action, format!("call_{i}")));
        let parse = parse_tool_call(&bad);
        check(parse.is_err(), format!("corruption {i} still parsed: {bad:?}"))?;
        let script = vec![bad, common::call(AgentAction::Finish { comment: "done".into() }, 2)];
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let (_d, mut env, err) = failing(vec![Cell::code("1/0")], 1, "ZeroDivisionError");
            let mut client = ScriptedClient::new(script).unwrap();
            run_session(&mut env, &err, &mut client, &AgentConfig::default(), &mut NoopObserver)
        }))
        .map_err(|_| format!("session {i} panicked"))?;
        let reprompted = outcome.transcript.iter().any(|m| m.content.starts_with("Your last reply was invalid"));
        match outcome.status {
            SessionStatus::Failed => failed += 1,
            _ if reprompted => corrected += 1,
            s => return Err(format!("corruption {i}: status {s:?} without a corrective re-prompt")),
        }
    }
    Ok(format!("100 corrupted calls: {corrected} re-prompted and recovered, {failed} failed cleanly, 0 panics"))
}

async fn service_properties() -> Outcome {
    let cfg = ServiceConfig::new().with_client_factory(common::factory(common::execute_forever(2, 6), Duration::from_millis(40)));
    let server = common::start(cfg).await;
    let (_, body) = server.create(&common::create_body(1)).await;
    let id = body["id"].as_str().ok_or("create failed")?.to_string();
    let first = server.events(&id, None, Some(3)).await;
    let rest = server.events(&id, first.last().map(|e| e.0), None).await;
    let seqs: Vec<u64> = first.iter().chain(&rest).map(|e| e.0).collect();
    check(seqs == (1..=seqs.len() as u64).collect::<Vec<_>>(), format!("seqs {seqs:?}"))?;

    let cfg = ServiceConfig::new().with_client_factory(common::factory(common::execute_forever(2, 15), Duration::from_millis(100)));
    let server = common::start(cfg).await;
    let (_, body) = server.create(&common::create_body(2)).await;
    let id = body["id"].as_str().ok_or("create failed")?.to_string();
    server.events(&id, None, Some(2)).await;
    server.post(&format!("/v1/sessions/{id}/abort")).await;
    let r = server.wait_result(&id).await;
    check(r["status"] == "aborted", format!("abort ended as {}", r["status"]))?;

    let cfg = ServiceConfig::new().with_client_factory(common::factory(common::fixing_script(), Duration::from_millis(30)));
    let server = common::start(cfg).await;
    let mut ids = Vec::new();
    for tag in 0..4 {
        let (status, body) = server.create(&common::create_body(100 + tag)).await;
        check(status == 201, format!("create {tag}: {status} {body}"))?;
        ids.push(body["id"].as_str().unwrap().to_string());
    }
    for (tag, id) in ids.iter().enumerate() {
        let r = server.wait_result(id).await;
        check(r["status"] == "finished_success", format!("session {tag}: {}", r["status"]))?;
        let text = r["notebook"].as_str().unwrap_or("");
        check(text.contains(&format!("\"{}\\n\"", 100 + tag)), format!("session {tag} saw another namespace"))?;
    }
    Ok(format!("{} contiguous seqs across reconnect; abort reached aborted; 4 concurrent sessions isolated", seqs.len()))
}

fn main() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("termination bound", Box::new(termination_bound)),
        ("timeout", Box::new(timeout)),
        ("resolution oracle", Box::new(resolution_oracle)),
        ("hack detection", Box::new(hack_detection)),
        ("memory-stack monotonicity", Box::new(memory_stack)),
        ("cost arithmetic", Box::new(cost_arithmetic)),
        ("histogram correctness", Box::new(histogram)),
        ("prompt fidelity", Box::new(prompt_fidelity)),
        ("protocol robustness", Box::new(protocol_robustness)),
        ("service properties", Box::new(|| rt.block_on(service_properties()))),
    ];
    let mut failures = 0;
    for (name, f) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
