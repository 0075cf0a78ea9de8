//! Trace, summary and plot-data writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use ripple_core::plant::PlantModel;
use ripple_core::sim::{message_stats, normalized_effort, Outcome, PreparedScenario, RunResult, Scenario};

/// `trace.csv`: one row per retained round with columns `round`,
/// `u_<label>` for every agent, `y_<label>` for every measured node,
/// `f_<label>` and `lambda_<label>` for every agent, and `messages`.
pub fn write_trace(dir: &Path, scenario: &Scenario, prepared: &PreparedScenario, result: &RunResult) -> Result<()> {
    let labels = &scenario.labels;
    let measured = prepared.plant.measured();
    let mut w = csv::Writer::from_path(dir.join("trace.csv")).context("cannot create trace.csv")?;
    let mut header = vec!["round".to_string()];
    header.extend(labels.iter().map(|l| format!("u_{l}")));
    header.extend(measured.iter().map(|&n| format!("y_{}", labels[n])));
    header.extend(labels.iter().map(|l| format!("f_{l}")));
    header.extend(labels.iter().map(|l| format!("lambda_{l}")));
    header.push("messages".into());
    w.write_record(&header)?;
    for rec in &result.trace {
        let mut row = vec![rec.round.to_string()];
        for v in rec.u.iter().chain(&rec.y).chain(&rec.f).chain(&rec.lambda) {
            row.push(v.to_string());
        }
        row.push(rec.messages.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `effort.csv`: normalized control effort `(u − u(0)) / (ū − u(0))` per
/// agent; `messages.csv`: per-round and cumulative message counts.
pub fn write_plotdata(dir: &Path, scenario: &Scenario, prepared: &PreparedScenario, result: &RunResult) -> Result<()> {
    let upper = prepared.plant.u_upper();
    let mut w = csv::Writer::from_path(dir.join("effort.csv")).context("cannot create effort.csv")?;
    let mut header = vec!["round".to_string()];
    header.extend(scenario.labels.iter().map(|l| format!("effort_{l}")));
    w.write_record(&header)?;
    for rec in &result.trace {
        let mut row = vec![rec.round.to_string()];
        row.extend(normalized_effort(&rec.u, &prepared.u0, upper).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;

    let stats = message_stats(&result.trace, &scenario.comm);
    let mut w = csv::Writer::from_path(dir.join("messages.csv")).context("cannot create messages.csv")?;
    w.write_record(["round", "messages", "cumulative"])?;
    for k in 0..stats.rounds.len() {
        w.write_record([
            stats.rounds[k].to_string(),
            stats.per_round[k].to_string(),
            stats.cumulative[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Gains<'a> {
    eta1: &'a [f64],
    eta2: &'a [f64],
    eta3: &'a [f64],
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    plant: &'a str,
    outcome: &'a Outcome,
    rounds: usize,
    feasible: bool,
    gain_condition: f64,
    gains: Gains<'a>,
    total_messages: usize,
    trace_records: usize,
    terminal_u: BTreeMap<&'a str, f64>,
    terminal_y: BTreeMap<&'a str, f64>,
    terminal_lambda: BTreeMap<&'a str, f64>,
    first_assistance: BTreeMap<&'a str, Option<usize>>,
}

pub fn write_summary(
    dir: &Path,
    scenario: &Scenario,
    prepared: &PreparedScenario,
    result: &RunResult,
) -> Result<()> {
    let labels = &scenario.labels;
    let by_label = |v: &[f64]| -> BTreeMap<&str, f64> { labels.iter().map(String::as_str).zip(v.iter().copied()).collect() };
    let last = result.trace.last();
    let terminal_y = last
        .map(|r| {
            prepared
                .plant
                .measured()
                .iter()
                .map(|&n| labels[n].as_str())
                .zip(r.y.iter().copied())
                .collect()
        })
        .unwrap_or_default();
    let feasible = last.is_some_and(|r| {
        r.round == result.final_state.round
            && r.y.iter().zip(prepared.plant.y_lower()).all(|(y, lo)| *y >= lo - prepared.config.eps_feas)
    });
    let stats = message_stats(&result.trace, &scenario.comm);
    let gains = &prepared.protocol.gains;
    let summary = Summary {
        scenario: &scenario.name,
        plant: prepared.plant.kind(),
        outcome: &result.outcome,
        rounds: result.final_state.round,
        feasible,
        gain_condition: prepared.gain_norm,
        gains: Gains {
            eta1: &gains.eta1,
            eta2: &gains.eta2,
            eta3: &gains.eta3,
        },
        total_messages: result.total_messages,
        trace_records: result.trace.len(),
        terminal_u: by_label(&result.final_state.u),
        terminal_y,
        terminal_lambda: by_label(&result.final_state.lambda),
        first_assistance: labels.iter().map(String::as_str).zip(stats.first_assistance).collect(),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")
        .context("cannot write summary.json")?;
    Ok(())
}
