//! Token and dollar accounting.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::agent::client::{ChatMessage, ChatRequest};
use crate::agent::session::{SessionRecord, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub step: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Counts came from [`estimate_tokens`] rather than the provider.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingTable {
    #[serde(serialize_with = "ser_decimal", deserialize_with = "de_decimal")]
    pub input_per_1k: Decimal,
    #[serde(serialize_with = "ser_decimal", deserialize_with = "de_decimal")]
    pub output_per_1k: Decimal,
    #[serde(default = "usd")]
    pub currency: String,
}

fn usd() -> String {
    "USD".into()
}

fn ser_decimal<S: Serializer>(d: &Decimal, s: S) -> Result<S::Ok, S::Error> {
    match serde_json::Number::from_str(&d.normalize().to_string()) {
        Ok(n) => n.serialize(s),
        Err(_) => s.serialize_str(&d.to_string()),
    }
}

/// Accepts JSON numbers and numeric strings without a detour through `f64`.
fn de_decimal<'de, D: Deserializer<'de>>(d: D) -> Result<Decimal, D::Error> {
    let text = match Value::deserialize(d)? {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s,
        other => return Err(serde::de::Error::custom(format!("expected a number, got {other}"))),
    };
    Decimal::from_str(&text)
        .or_else(|_| Decimal::from_scientific(&text))
        .map_err(serde::de::Error::custom)
}

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("no sessions to summarize")]
    EmptyInput,
    #[error("invalid pricing: {0}")]
    InvalidPricing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PricingTable {
    pub fn new(input_per_1k: Decimal, output_per_1k: Decimal) -> Result<Self, CostError> {
        let table = PricingTable { input_per_1k, output_per_1k, currency: usd() };
        table.validate()?;
        Ok(table)
    }

    pub fn parse(text: &str) -> Result<Self, CostError> {
        let table: PricingTable = serde_json::from_str(text).map_err(|e| CostError::InvalidPricing(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        PricingTable::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), CostError> {
        if self.input_per_1k.is_sign_negative() || self.output_per_1k.is_sign_negative() {
            return Err(CostError::InvalidPricing("rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Exact dollar cost of `usage`.
pub fn compute_cost(usage: &[UsageRecord], pricing: &PricingTable) -> Decimal {
    let thousand = Decimal::from(1000);
    usage
        .iter()
        .map(|u| {
            Decimal::from(u.prompt_tokens) * pricing.input_per_1k / thousand
                + Decimal::from(u.completion_tokens) * pricing.output_per_1k / thousand
        })
        .sum()
}

/// Fallback token count: a quarter of the characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

fn message_text(m: &ChatMessage) -> String {
    let mut s = m.content.clone();
    if let Some(call) = &m.tool_call {
        s.push_str(&call.name);
        s.push_str(&call.arguments);
    }
    s
}

/// Estimated prompt tokens for a request: every message plus the tool schema.
pub fn estimate_request_tokens(request: &ChatRequest) -> u64 {
    let mut text: String = request.messages.iter().map(message_text).collect();
    if let Some(tools) = &request.tools {
        text.push_str(&tools.to_string());
    }
    estimate_tokens(&text)
}

pub fn estimate_reply_tokens(reply: &ChatMessage) -> u64 {
    estimate_tokens(&message_text(reply))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionCost {
    pub session_id: String,
    pub strategy: Strategy,
    pub steps: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub sessions: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_cost: Decimal,
    pub mean_cost: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSummary {
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub total_cost: Decimal,
    pub mean_cost: Decimal,
    pub per_step: Vec<UsageRecord>,
    /// Resolution steps to number of sessions.
    pub steps_histogram: BTreeMap<usize, usize>,
    pub sessions: Vec<SessionCost>,
    /// One row per strategy present, agent first.
    pub comparison: Vec<StrategyRow>,
    pub currency: String,
}

fn sort_key(r: &SessionRecord) -> (String, Strategy, usize, Vec<(u64, u64, usize)>) {
    let usage = r.result.usage.iter().map(|u| (u.prompt_tokens, u.completion_tokens, u.step)).collect();
    (r.session_id.clone(), r.result.strategy, r.result.steps_taken, usage)
}

/// Aggregates sessions. Output does not depend on input order.
pub fn summarize(records: &[SessionRecord], pricing: &PricingTable) -> Result<CostSummary, CostError> {
    if records.is_empty() {
        return Err(CostError::EmptyInput);
    }
    let mut sorted: Vec<&SessionRecord> = records.iter().collect();
    sorted.sort_by_cached_key(|r| sort_key(r));

    let mut per_step = Vec::new();
    let mut histogram = BTreeMap::new();
    let mut sessions = Vec::new();
    for r in &sorted {
        let res = &r.result;
        per_step.extend(res.usage.iter().copied());
        *histogram.entry(res.resolution_steps()).or_insert(0) += 1;
        sessions.push(SessionCost {
            session_id: r.session_id.clone(),
            strategy: res.strategy,
            steps: res.resolution_steps(),
            prompt_tokens: res.usage.iter().map(|u| u.prompt_tokens).sum(),
            completion_tokens: res.usage.iter().map(|u| u.completion_tokens).sum(),
            cost: compute_cost(&res.usage, pricing),
        });
    }

    let mut comparison = Vec::new();
    for strategy in [Strategy::Agent, Strategy::SingleAction] {
        let rows: Vec<&SessionCost> = sessions.iter().filter(|s| s.strategy == strategy).collect();
        if rows.is_empty() {
            continue;
        }
        let total_cost: Decimal = rows.iter().map(|s| s.cost).sum();
        comparison.push(StrategyRow {
            strategy,
            sessions: rows.len(),
            prompt_tokens: rows.iter().map(|s| s.prompt_tokens).sum(),
            completion_tokens: rows.iter().map(|s| s.completion_tokens).sum(),
            total_cost,
            mean_cost: total_cost / Decimal::from(rows.len()),
        });
    }

    let total_cost = compute_cost(&per_step, pricing);
    Ok(CostSummary {
        total_prompt_tokens: per_step.iter().map(|u| u.prompt_tokens).sum(),
        total_completion_tokens: per_step.iter().map(|u| u.completion_tokens).sum(),
        total_cost,
        mean_cost: total_cost / Decimal::from(sorted.len()),
        per_step,
        steps_histogram: histogram,
        sessions,
        comparison,
        currency: pricing.currency.clone(),
    })
}

fn money(d: Decimal) -> String {
    d.round_dp(6).normalize().to_string()
}

impl CostSummary {
    /// `session_id,strategy,steps,prompt_tokens,completion_tokens,cost_usd`
    pub fn costs_csv(&self) -> Result<String, CostError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["session_id", "strategy", "steps", "prompt_tokens", "completion_tokens", "cost_usd"])?;
        for s in &self.sessions {
            w.write_record([
                s.session_id.clone(),
                s.strategy.as_str().to_string(),
                s.steps.to_string(),
                s.prompt_tokens.to_string(),
                s.completion_tokens.to_string(),
                money(s.cost),
            ])?;
        }
        finish_csv(w)
    }

    /// `steps,count`
    pub fn histogram_csv(&self) -> Result<String, CostError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["steps", "count"])?;
        for (steps, count) in &self.steps_histogram {
            w.write_record([steps.to_string(), count.to_string()])?;
        }
        finish_csv(w)
    }

    /// Series for request tokens, response tokens and the steps distribution.
    pub fn plot_data(&self) -> Value {
        let mut request = serde_json::Map::new();
        let mut response = serde_json::Map::new();
        for strategy in [Strategy::Agent, Strategy::SingleAction] {
            let rows: Vec<&SessionCost> = self.sessions.iter().filter(|s| s.strategy == strategy).collect();
            if rows.is_empty() {
                continue;
            }
            request.insert(strategy.as_str().into(), rows.iter().map(|s| s.prompt_tokens).collect());
            response.insert(strategy.as_str().into(), rows.iter().map(|s| s.completion_tokens).collect());
        }
        let histogram: serde_json::Map<String, Value> =
            self.steps_histogram.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        json!({
            "request_tokens": request,
            "response_tokens": response,
            "steps_histogram": histogram,
        })
    }

    /// Writes `costs.csv`, `histogram.csv` and `plot_data.json` into `dir`.
    pub fn write_reports(&self, dir: &Path) -> Result<(), CostError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("costs.csv"), self.costs_csv()?)?;
        std::fs::write(dir.join("histogram.csv"), self.histogram_csv()?)?;
        let plot = serde_json::to_string_pretty(&self.plot_data()).expect("JSON values serialize");
        std::fs::write(dir.join("plot_data.json"), plot + "\n")?;
        Ok(())
    }

    pub fn mean_cost_f64(&self) -> f64 {
        self.mean_cost.to_f64().unwrap_or(f64::NAN)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CostError> {
    let bytes = w.into_inner().map_err(|e| CostError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv fields are UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, p: u64, c: u64) -> UsageRecord {
        UsageRecord { step, prompt_tokens: p, completion_tokens: c, estimated: false }
    }

    #[test]
    fn cost_examples() {
        let pricing = PricingTable::parse(r#"{"input_per_1k": 0.03, "output_per_1k": 0.06, "currency": "USD"}"#).unwrap();
        assert_eq!(compute_cost(&[], &pricing), Decimal::ZERO);
        assert_eq!(compute_cost(&[rec(1, 5000, 1000)], &pricing), Decimal::from_str("0.21").unwrap());
        assert_eq!(
            compute_cost(&[rec(1, 2000, 400), rec(2, 3000, 600)], &pricing),
            Decimal::from_str("0.21").unwrap()
        );
    }

    #[test]
    fn pricing_rejects_negative_rates() {
        assert!(PricingTable::parse(r#"{"input_per_1k": -1, "output_per_1k": 0}"#).is_err());
        let p = PricingTable::parse(r#"{"input_per_1k": "0.03", "output_per_1k": 6e-2}"#).unwrap();
        assert_eq!(p.output_per_1k, Decimal::from_str("0.06").unwrap());
        assert_eq!(p.currency, "USD");
    }

    #[test]
    fn estimator() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
        assert_eq!(estimate_tokens("abcdefghi"), 3);
    }
}
