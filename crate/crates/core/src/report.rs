//! Report serialization.
//!
//! Aggregate results are pretty-printed JSON records. Tables are CSV with a
//! fixed header, LF line endings and reals printed to 12 significant digits.

use std::io::{self, Write};

use serde::Serialize;

use crate::balance::{BalanceResult, CostRates};
use crate::config::{ConfigDocument, RawStats};
use crate::market::MarketSettlement;
use crate::sim::{AggregateReport, StepRecord};

pub const TRACE_HEADER: [&str; 9] = [
    "replication",
    "step",
    "demand",
    "provisioned",
    "violation",
    "wasted",
    "wastage_cost",
    "penalty_cost",
    "energy_kwh",
];

pub const SETTLEMENT_HEADER: [&str; 5] = ["name", "cap_kg", "emissions_kg", "position_kg", "cash_flow"];

pub const SWEEP_HEADER: [&str; 13] = [
    "mean_demand",
    "max_demand",
    "r_agreed",
    "c_en",
    "c_co2",
    "c_viol",
    "satisfaction",
    "r_provisioned",
    "w",
    "c_wastage",
    "p_viol",
    "expected_penalty",
    "error",
];

/// Formats a real with 12 significant digits in the style of C's `%.12g`.
pub fn fmt_real(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // round first, then read the exponent off the rounded value
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[StepRecord]) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in trace {
        w.write_record([
            r.replication.to_string(),
            r.step.to_string(),
            fmt_real(r.demand),
            fmt_real(r.provisioned),
            r.violation.to_string(),
            fmt_real(r.wasted),
            fmt_real(r.wastage_cost),
            fmt_real(r.penalty_cost),
            fmt_real(r.energy_kwh),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// One row per account followed by a `TOTAL` row.
pub fn write_settlement_csv<W: Write>(out: W, settlement: &MarketSettlement) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SETTLEMENT_HEADER).map_err(csv_err)?;
    for r in &settlement.rows {
        w.write_record([
            r.name.clone(),
            fmt_real(r.cap_kg),
            fmt_real(r.emissions_kg),
            fmt_real(r.position_kg),
            fmt_real(r.cash_flow),
        ])
        .map_err(csv_err)?;
    }
    let cap: f64 = settlement.rows.iter().map(|r| r.cap_kg).sum();
    let emitted: f64 = settlement.rows.iter().map(|r| r.emissions_kg).sum();
    w.write_record([
        "TOTAL".to_string(),
        fmt_real(cap),
        fmt_real(emitted),
        fmt_real(settlement.total_position_kg),
        fmt_real(settlement.net_cash_flow),
    ])
    .map_err(csv_err)?;
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub stats: RawStats,
    pub rates: CostRates,
    pub outcome: Result<BalanceResult, String>,
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![
            fmt_real(row.stats.mean_demand),
            fmt_real(row.stats.max_demand),
            fmt_real(row.stats.r_agreed),
            fmt_real(row.rates.c_en),
            fmt_real(row.rates.c_co2),
            fmt_real(row.rates.c_viol),
            fmt_real(row.rates.satisfaction),
        ];
        match &row.outcome {
            Ok(b) => {
                rec.extend(
                    [b.r_provisioned, b.w, b.c_wastage, b.p_viol, b.expected_penalty].map(fmt_real),
                );
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct BalanceInputs {
    pub mean_demand: f64,
    pub max_demand: f64,
    pub r_agreed: f64,
    pub c_en: f64,
    pub c_co2: f64,
    pub c_viol: f64,
    pub satisfaction: f64,
}

#[derive(Debug, Serialize)]
pub struct BalanceRecord {
    pub command: &'static str,
    pub method: &'static str,
    pub inputs: BalanceInputs,
    pub result: BalanceResult,
}

#[derive(Debug, Serialize)]
pub struct SimulationRecord<'a> {
    pub command: &'static str,
    pub seed: u64,
    pub aggregate: &'a AggregateReport,
    pub config: &'a ConfigDocument,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report records serialize");
    s.push('\n');
    s
}
