use std::str::FromStr;

use nbfix_core::agent::{HackReport, SessionRecord, SessionResult, SessionStatus, Strategy};
use nbfix_core::cost::{compute_cost, summarize, CostError, PricingTable, UsageRecord};
use nbfix_core::eval::sample_pricing_path;
use nbfix_core::notebook::Notebook;
use proptest::prelude::*;
use rust_decimal::Decimal;

fn usage(records: &[(u64, u64)]) -> Vec<UsageRecord> {
    records
        .iter()
        .enumerate()
        .map(|(i, &(p, c))| UsageRecord { step: i + 1, prompt_tokens: p, completion_tokens: c, estimated: false })
        .collect()
}

fn session(id: &str, strategy: Strategy, status: SessionStatus, steps: usize, records: &[(u64, u64)]) -> SessionRecord {
    SessionRecord {
        session_id: id.into(),
        result: SessionResult {
            status,
            strategy,
            steps_taken: steps,
            transcript: Vec::new(),
            final_notebook: Notebook::default(),
            usage: usage(records),
            hack_report: HackReport::default(),
            verified: true,
            error: None,
        },
    }
}

fn sample() -> PricingTable {
    PricingTable::load(&sample_pricing_path()).unwrap()
}

#[test]
fn sample_pricing_file() {
    let p = sample();
    assert_eq!(p.input_per_1k, Decimal::from_str("0.03").unwrap());
    assert_eq!(p.output_per_1k, Decimal::from_str("0.06").unwrap());
    assert_eq!(p.currency, "USD");
}

#[test]
fn histogram_counts_sessions() {
    let agent = Strategy::Agent;
    let done = SessionStatus::FinishedSuccess;
    // Agent sessions end with a finish call, which is not a repair step.
    let records = vec![
        session("a", agent, done, 2, &[(10, 1), (20, 1)]),
        session("b", agent, done, 2, &[(10, 1), (20, 1)]),
        session("c", agent, done, 4, &[(10, 1), (20, 1), (30, 1), (40, 1)]),
    ];
    let s = summarize(&records, &sample()).unwrap();
    assert_eq!(s.steps_histogram.into_iter().collect::<Vec<_>>(), vec![(1, 2), (3, 1)]);
}

#[test]
fn comparison_rows() {
    let records = vec![
        session("agent", Strategy::Agent, SessionStatus::FinishedSuccess, 3, &[(900, 40), (1000, 30), (1100, 20)]),
        session("single", Strategy::SingleAction, SessionStatus::FinishedSuccess, 1, &[(700, 90)]),
    ];
    let s = summarize(&records, &sample()).unwrap();
    assert_eq!(s.comparison.len(), 2);
    assert_eq!(s.comparison[0].strategy, Strategy::Agent);
    assert!(s.comparison[0].prompt_tokens > s.comparison[1].prompt_tokens);
    let csv = s.costs_csv().unwrap();
    assert_eq!(
        csv,
        "session_id,strategy,steps,prompt_tokens,completion_tokens,cost_usd\nagent,agent,2,3000,90,0.0954\nsingle,single_action,1,700,90,0.0264\n"
    );
    assert_eq!(s.histogram_csv().unwrap(), "steps,count\n1,1\n2,1\n");
    let plot = s.plot_data();
    assert_eq!(plot["request_tokens"]["agent"][0], 3000);
    assert_eq!(plot["response_tokens"]["single_action"][0], 90);
}

#[test]
fn single_session_mean_is_its_cost() {
    let r = session("x", Strategy::Agent, SessionStatus::MaxSteps, 15, &[(5000, 1000)]);
    let s = summarize(std::slice::from_ref(&r), &sample()).unwrap();
    assert_eq!(s.mean_cost, compute_cost(&r.result.usage, &sample()));
    assert!(matches!(summarize(&[], &sample()), Err(CostError::EmptyInput)));
}

#[test]
fn totals_match_per_step_records() {
    let records = vec![
        session("a", Strategy::Agent, SessionStatus::Timeout, 2, &[(3, 4), (5, 6)]),
        session("b", Strategy::SingleAction, SessionStatus::Failed, 1, &[(7, 8)]),
    ];
    let s = summarize(&records, &sample()).unwrap();
    assert_eq!(s.total_prompt_tokens, s.per_step.iter().map(|u| u.prompt_tokens).sum::<u64>());
    assert_eq!((s.total_prompt_tokens, s.total_completion_tokens), (15, 18));
    assert_eq!(s.steps_histogram.values().sum::<usize>(), 2);
}

/// Exact cost in nano-dollars, from rates given in micro-dollars per 1K tokens.
fn oracle_nano(records: &[(u64, u64)], in_micro: u64, out_micro: u64) -> i128 {
    records.iter().map(|&(p, c)| p as i128 * in_micro as i128 + c as i128 * out_micro as i128).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn cost_matches_integer_oracle(records in proptest::collection::vec((0u64..200_000, 0u64..50_000), 0..30), in_micro in 0u64..100_000, out_micro in 0u64..100_000) {
        let pricing = PricingTable::new(Decimal::new(in_micro as i64, 6), Decimal::new(out_micro as i64, 6)).unwrap();
        let cost = compute_cost(&usage(&records), &pricing);
        let nano = (cost * Decimal::from(1_000_000_000u64)).round();
        prop_assert_eq!(nano, Decimal::from(oracle_nano(&records, in_micro, out_micro)));
    }
}

proptest! {
    #[test]
    fn cost_is_linear(records in proptest::collection::vec((0u64..100_000, 0u64..100_000), 0..20), split in 0usize..20) {
        let all = usage(&records);
        let at = split.min(all.len());
        let p = sample();
        prop_assert_eq!(compute_cost(&all, &p), compute_cost(&all[..at], &p) + compute_cost(&all[at..], &p));
    }

    #[test]
    fn summarize_ignores_order(
        sessions in proptest::collection::vec(("[a-d]", any::<bool>(), 1usize..6, proptest::collection::vec((0u64..5000, 0u64..500), 1..4)), 1..8),
        seed in any::<u64>(),
    ) {
        let records: Vec<SessionRecord> = sessions
            .iter()
            .map(|(id, agent, steps, u)| {
                let strategy = if *agent { Strategy::Agent } else { Strategy::SingleAction };
                session(id, strategy, SessionStatus::FinishedSuccess, *steps, u)
            })
            .collect();
        let mut shuffled = records.clone();
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % n as u64) as usize;
            shuffled.swap(i, j);
        }
        let a = summarize(&records, &sample()).unwrap();
        let b = summarize(&shuffled, &sample()).unwrap();
        prop_assert_eq!(a.costs_csv().unwrap(), b.costs_csv().unwrap());
        prop_assert_eq!(&a, &b);
    }
}
