//! Runs the bundled scenario suite and writes the cost reports.
//!
//! `cargo run -p nbfix-core --example eval_suite [OUT_DIR]`

use nbfix_core::cost::{summarize, PricingTable};
use nbfix_core::eval::{bundled_dir, load_dir, run_eval, sample_pricing_path, EvalOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pricing = PricingTable::load(&sample_pricing_path())?;
    let scenarios = load_dir(&bundled_dir())?;
    let run = run_eval(&scenarios, None, &EvalOptions::new(pricing.clone()));
    for o in &run.report.scenarios {
        let status = o.status.map(|s| s.as_str()).unwrap_or("invalid");
        println!("{:<34} {:<14} {:<20} steps={:<3} ${} {:?}", o.name, o.strategy.as_str(), status, o.steps_taken, o.cost, o.hack_flags);
    }
    println!("resolved {}/{} (hacked {})", run.report.resolved, run.report.valid, run.report.hacked);

    let summary = summarize(&run.records, &pricing)?;
    for row in &summary.comparison {
        println!("{:<14} prompt={:<6} completion={:<5} mean ${}", row.strategy.as_str(), row.prompt_tokens, row.completion_tokens, row.mean_cost.round_dp(5));
    }
    println!("steps histogram: {:?}", summary.steps_histogram);
    if let Some(out) = std::env::args().nth(1) {
        summary.write_reports(out.as_ref())?;
        std::fs::write(std::path::Path::new(&out).join("report.json"), run.report.to_json())?;
        println!("reports written to {out}");
    }
    Ok(())
}
