//! Scenario execution: disrupt a plant, run the protocol against it, record
//! the trace and classify how the run ended.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;
use crate::linalg::inf_norm;
use crate::plant::{default_probe_step, feasibility_check, monotonicity_probe, LinearPlant, PlantModel};
use crate::power::GridModel;
use crate::ripple::{gain_condition, is_equilibrium, GAIN_NORM_TOL, Protocol, ProtocolGains, ProtocolState};
use crate::water::WaterModel;

/// Rounds with saturated controls and an unchanged, nonzero violation after
/// which a run is declared stalled.
pub const STALL_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioPlant {
    Power(GridModel),
    Water(WaterModel),
    Linear(LinearPlant),
}

impl ScenarioPlant {
    fn inner(&self) -> &dyn PlantModel {
        match self {
            ScenarioPlant::Power(p) => p,
            ScenarioPlant::Water(p) => p,
            ScenarioPlant::Linear(p) => p,
        }
    }

    pub fn nominal_control(&self) -> Vec<f64> {
        match self {
            ScenarioPlant::Power(p) => p.nominal_control(),
            ScenarioPlant::Water(p) => p.nominal_control(),
            ScenarioPlant::Linear(p) => p.nominal().to_vec(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioPlant::Power(_) => "power",
            ScenarioPlant::Water(_) => "water",
            ScenarioPlant::Linear(_) => "linear",
        }
    }
}

impl PlantModel for ScenarioPlant {
    fn control_dim(&self) -> usize {
        self.inner().control_dim()
    }

    fn measured(&self) -> &[usize] {
        self.inner().measured()
    }

    fn u_lower(&self) -> &[f64] {
        self.inner().u_lower()
    }

    fn u_upper(&self) -> &[f64] {
        self.inner().u_upper()
    }

    fn y_lower(&self) -> &[f64] {
        self.inner().y_lower()
    }

    fn solve(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.inner().solve(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum DemandChange {
    Scale(f64),
    Set(f64),
}

impl DemandChange {
    fn apply(self, x: f64) -> f64 {
        match self {
            DemandChange::Scale(s) => s * x,
            DemandChange::Set(v) => v,
        }
    }
}

/// A change to the physical plant. Node indices are zero-based.
///
/// For linear plants, demand changes act on the output offset of a measured
/// node and parameter changes set the sensitivity `∂y_a / ∂u_b`.
#[derive(Debug, Clone, PartialEq)]
pub enum DisruptionEvent {
    /// Trip a line or remove a pipe/pump.
    EdgeRemoval { a: usize, b: usize },
    /// Take a generator or water source out of service.
    SourceOutage { node: usize },
    DemandChange { nodes: Vec<usize>, change: DemandChange },
    /// Line susceptance, pipe coefficient, or linear sensitivity entry.
    ParameterChange { a: usize, b: usize, value: f64 },
}

/// Returns the plant after `event`; `plant` itself is untouched.
pub fn apply_disruption(plant: &ScenarioPlant, event: &DisruptionEvent) -> Result<ScenarioPlant> {
    use DisruptionEvent as E;
    match (plant, event) {
        (ScenarioPlant::Power(g), E::EdgeRemoval { a, b }) => g.without_line(*a, *b).map(ScenarioPlant::Power),
        (ScenarioPlant::Power(g), E::SourceOutage { node }) => {
            g.without_generator(*node).map(ScenarioPlant::Power)
        }
        (ScenarioPlant::Power(g), E::DemandChange { nodes, change }) => {
            let mut g = g.clone();
            for &n in nodes {
                g = g.with_load(n, |q| change.apply(q))?;
            }
            Ok(ScenarioPlant::Power(g))
        }
        (ScenarioPlant::Power(g), E::ParameterChange { a, b, value }) => {
            g.with_line_susceptance(*a, *b, *value).map(ScenarioPlant::Power)
        }
        (ScenarioPlant::Water(w), E::EdgeRemoval { a, b }) => w.without_edge(*a, *b).map(ScenarioPlant::Water),
        (ScenarioPlant::Water(w), E::SourceOutage { node }) => w.without_source(*node).map(ScenarioPlant::Water),
        (ScenarioPlant::Water(w), E::DemandChange { nodes, change }) => {
            let mut w = w.clone();
            for &n in nodes {
                w = w.with_control(n, |d| change.apply(d))?;
            }
            Ok(ScenarioPlant::Water(w))
        }
        (ScenarioPlant::Water(w), E::ParameterChange { a, b, value }) => {
            w.with_pipe_coefficient(*a, *b, *value).map(ScenarioPlant::Water)
        }
        (ScenarioPlant::Linear(p), E::DemandChange { nodes, change }) => {
            let mut p = p.clone();
            for &n in nodes {
                let row = linear_row(&p, n)?;
                let next = change.apply(p.offset()[row]);
                p.set_offset(row, next);
            }
            Ok(ScenarioPlant::Linear(p))
        }
        (ScenarioPlant::Linear(p), E::ParameterChange { a, b, value }) => {
            let row = linear_row(p, *a)?;
            if *b >= p.control_dim() {
                return Err(Error::InvalidScenario(format!("control {b} does not exist")));
            }
            let mut p = p.clone();
            p.set_sensitivity(row, *b, *value);
            Ok(ScenarioPlant::Linear(p))
        }
        (ScenarioPlant::Linear(_), other) => Err(Error::InvalidScenario(format!(
            "{other:?} does not apply to a linear plant"
        ))),
    }
}

fn linear_row(p: &LinearPlant, node: usize) -> Result<usize> {
    p.measured()
        .iter()
        .position(|&m| m == node)
        .ok_or_else(|| Error::InvalidScenario(format!("node {node} is not measured")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub budget: usize,
    pub eps_eq: f64,
    pub eps_feas: f64,
    /// Keep every k-th trace record (plus the first and last two).
    pub decimation: usize,
    pub override_gain_check: bool,
    /// Seed for randomized auxiliary checks; the run itself is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            budget: 100_000,
            eps_eq: 1e-8,
            eps_feas: 1e-6,
            decimation: 1,
            override_gain_check: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainChoice {
    Auto,
    Scalar(f64),
    Vector(Vec<f64>),
}

impl GainChoice {
    fn fixed(&self, n: usize) -> Option<Result<Vec<f64>>> {
        match self {
            GainChoice::Auto => None,
            GainChoice::Scalar(x) => Some(Ok(vec![*x; n])),
            GainChoice::Vector(v) => Some(check_len(n, v.len()).map(|_| v.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSettings {
    pub eta1: GainChoice,
    pub eta2: GainChoice,
    pub eta3: GainChoice,
}

impl GainSettings {
    pub fn auto() -> Self {
        Self {
            eta1: GainChoice::Auto,
            eta2: GainChoice::Auto,
            eta3: GainChoice::Auto,
        }
    }
}

/// Resolves automatic gains: `η₃ = 1`; uniform `η₂` putting the gain norm at
/// 0.5; `η₁ = 0.5 / ∂y_n/∂u_n` on measured nodes (probed at `u0`) and 1
/// elsewhere.
pub fn resolve_gains(
    settings: &GainSettings,
    plant: &dyn PlantModel,
    comm: &Graph,
    u0: &[f64],
) -> Result<ProtocolGains> {
    let n = plant.control_dim();
    let eta3 = settings.eta3.fixed(n).unwrap_or_else(|| Ok(vec![1.0; n]))?;
    let eta2 = match settings.eta2.fixed(n) {
        Some(v) => v?,
        None => {
            let norm = gain_condition(&vec![1.0; n], &eta3, comm);
            vec![if norm > 0.0 { 0.5 / norm } else { 1.0 }; n]
        }
    };
    let eta1 = match settings.eta1.fixed(n) {
        Some(v) => v?,
        None => {
            let probe = monotonicity_probe(plant, u0, default_probe_step(u0))?;
            (0..n)
                .map(|i| match probe.diagonal(plant.measured(), i) {
                    Some(s) if s > 1e-12 => 0.5 / s,
                    _ => 1.0,
                })
                .collect()
        }
    };
    ProtocolGains::new(eta1, eta2, eta3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Node labels, used by writers.
    pub labels: Vec<String>,
    /// Pre-disruption plant.
    pub plant: ScenarioPlant,
    pub comm: Graph,
    pub gains: GainSettings,
    /// Initial control; defaults to the disrupted plant's nominal operating point.
    pub u0: Option<Vec<f64>>,
    /// Applied in order.
    pub disruption: Vec<DisruptionEvent>,
    pub config: RunConfig,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScenario {
    pub plant: ScenarioPlant,
    pub protocol: Protocol,
    pub u0: Vec<f64>,
    pub config: RunConfig,
    pub gain_norm: f64,
}

impl Scenario {
    pub fn disrupted_plant(&self) -> Result<ScenarioPlant> {
        self.disruption
            .iter()
            .try_fold(self.plant.clone(), |p, e| apply_disruption(&p, e))
    }

    pub fn initial_control(&self, disrupted: &ScenarioPlant) -> Vec<f64> {
        self.u0.clone().unwrap_or_else(|| disrupted.nominal_control())
    }

    /// Applies the disruption, checks the communication graph, the initial
    /// control, the gains and the well-posedness of the disrupted plant.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        let plant = self.disrupted_plant()?;
        let n = plant.control_dim();
        check_len(n, self.labels.len())?;
        if self.comm.node_count() != n {
            return Err(Error::InvalidScenario(format!(
                "communication graph has {} nodes, plant has {n}",
                self.comm.node_count()
            )));
        }
        if !self.comm.is_connected() {
            return Err(Error::InvalidScenario("communication graph is not connected".into()));
        }
        let u0 = self.initial_control(&plant);
        check_len(n, u0.len())?;
        for (i, &x) in u0.iter().enumerate() {
            let (lo, hi) = (plant.u_lower()[i], plant.u_upper()[i]);
            if !(x >= lo && x <= hi) {
                return Err(Error::InvalidScenario(format!(
                    "initial control {} = {} outside [{lo}, {hi}]",
                    self.labels[i], u0[i]
                )));
            }
        }
        plant.solve(&u0).map_err(|e| Error::solver_failure(&u0, e))?;
        let gains = resolve_gains(&self.gains, &plant, &self.comm, &u0)?;
        let protocol = Protocol::new(
            self.comm.clone(),
            gains,
            plant.u_upper().to_vec(),
            plant.y_lower().to_vec(),
            plant.measured().to_vec(),
        )?;
        let gain_norm = protocol.gain_condition();
        // The norm is only known to GAIN_NORM_TOL; a value that close to one
        // is not certified.
        if gain_norm >= 1.0 - GAIN_NORM_TOL && !self.config.override_gain_check {
            return Err(Error::InvalidScenario(format!(
                "gain condition ‖diag(η₂)diag(η₃)A‖ = {gain_norm:.6} is not below 1"
            )));
        }
        Ok(PreparedScenario {
            plant,
            protocol,
            u0,
            config: self.config,
            gain_norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub round: usize,
    pub u: Vec<f64>,
    /// Outputs at `u`, parallel to the measured set.
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Beacons sent at the end of this round.
    pub messages: usize,
    /// Seconds since the run started; not reproducible across runs.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Converged { rounds: usize },
    Stalled { rounds: usize, max_violation: f64 },
    SolverFailure { round: usize, detail: String },
    BudgetExceeded { rounds: usize },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Converged { .. } => "converged",
            Outcome::Stalled { .. } => "stalled",
            Outcome::SolverFailure { .. } => "solver_failure",
            Outcome::BudgetExceeded { .. } => "budget_exceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trace: Vec<TraceRecord>,
    /// Final protocol state, kept even when the trace is decimated.
    pub final_state: ProtocolState,
    pub total_messages: usize,
}

/// Validates and runs a scenario.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    let prepared = scenario.prepare()?;
    Ok(run_prepared(&prepared))
}

pub fn run_prepared(p: &PreparedScenario) -> RunResult {
    run_protocol(&p.plant, &p.protocol, &p.u0, &p.config)
}

/// Runs scenarios in parallel; results are in input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<RunResult>> {
    scenarios.par_iter().map(run).collect()
}

/// Runs already validated scenarios in parallel; results are in input order.
pub fn run_batch_prepared(prepared: &[PreparedScenario]) -> Vec<RunResult> {
    prepared.par_iter().map(run_prepared).collect()
}

struct TraceSink {
    decimation: usize,
    records: Vec<TraceRecord>,
    /// The two most recent records, retained so a decimated trace still ends
    /// with the rounds that decided the outcome.
    tail: Vec<TraceRecord>,
}

impl TraceSink {
    fn new(decimation: usize) -> Self {
        Self {
            decimation: decimation.max(1),
            records: Vec::new(),
            tail: Vec::with_capacity(2),
        }
    }

    fn push(&mut self, rec: TraceRecord) {
        if rec.round.is_multiple_of(self.decimation) {
            self.records.push(rec.clone());
        }
        if self.tail.len() == 2 {
            self.tail.remove(0);
        }
        self.tail.push(rec);
    }

    fn finish(mut self) -> Vec<TraceRecord> {
        let last_kept = self.records.last().map(|r| r.round);
        for rec in self.tail {
            if last_kept.is_none_or(|r| rec.round > r) {
                self.records.push(rec);
            }
        }
        self.records
    }
}

/// The protocol loop: one plant solve per round, starting from `u0` with
/// silent beacons.
///
/// A run ends when consecutive states agree within `eps_eq` and either the
/// outputs are feasible with beacons below `eps_feas` (`Converged`) or every
/// control sits at its upper limit (`Stalled`). It also stalls once the controls have been saturated
/// with an unchanged violation for [`STALL_ROUNDS`] rounds.
pub fn run_protocol(plant: &dyn PlantModel, protocol: &Protocol, u0: &[f64], config: &RunConfig) -> RunResult {
    let start = Instant::now();
    let n = plant.control_dim();
    let u_upper = plant.u_upper();
    let measured = plant.measured();
    let mut sink = TraceSink::new(config.decimation);
    let mut total_messages = 0;

    let mut state = ProtocolState::initial(u0.to_vec());
    let failure = |round: usize, state: ProtocolState, sink: TraceSink, total: usize, e: Error| RunResult {
        outcome: Outcome::SolverFailure {
            round,
            detail: Error::solver_failure(&state.u, e).to_string(),
        },
        trace: sink.finish(),
        final_state: state,
        total_messages: total,
    };
    let mut y = match plant.solve(u0) {
        Ok(y) => y,
        Err(e) => return failure(0, state, sink, 0, e),
    };
    let mut f = crate::ripple::violation(&y, plant.y_lower(), measured, n);
    sink.push(TraceRecord {
        round: 0,
        u: state.u.clone(),
        y: y.clone(),
        f: f.clone(),
        lambda: state.lambda.clone(),
        messages: 0,
        wall_time: start.elapsed().as_secs_f64(),
    });

    let mut stall_count = 0;
    for round in 1..=config.budget {
        let out = match protocol.round(&state, &y) {
            Ok(out) => out,
            Err(e) => return failure(round, state, sink, total_messages, e),
        };
        let next = out.state;
        let y_next = match plant.solve(&next.u) {
            Ok(y) => y,
            Err(e) => return failure(round, next, sink, total_messages, e),
        };
        let f_next = crate::ripple::violation(&y_next, plant.y_lower(), measured, n);
        total_messages += out.messages.len();
        sink.push(TraceRecord {
            round,
            u: next.u.clone(),
            y: y_next.clone(),
            f: f_next.clone(),
            lambda: next.lambda.clone(),
            messages: out.messages.len(),
            wall_time: start.elapsed().as_secs_f64(),
        });

        let saturated = next
            .u
            .iter()
            .zip(u_upper)
            .all(|(u, hi)| (hi - u).abs() <= config.eps_eq);
        let worst = inf_norm(&f_next);
        let feasible = worst <= config.eps_feas;
        let settled = is_equilibrium(&state, &next, config.eps_eq);
        let f_unchanged = f_next
            .iter()
            .zip(&f)
            .all(|(a, b)| (a - b).abs() <= config.eps_eq);
        stall_count = if saturated && !feasible && f_unchanged {
            stall_count + 1
        } else {
            0
        };

        state = next;
        y = y_next;
        f = f_next;

        // A feasible fixed point has silent beacons; an increment test met
        // while beacons linger only reflects slow contraction.
        let silent = inf_norm(&state.lambda) <= config.eps_feas;
        let outcome = if settled && feasible && silent {
            match feasibility_check(plant, &state.u, config.eps_feas) {
                Ok(true) => Some(Outcome::Converged { rounds: round }),
                Ok(false) => None,
                Err(e) => return failure(round, state, sink, total_messages, e),
            }
        } else if (settled && saturated && !feasible) || stall_count >= STALL_ROUNDS {
            Some(Outcome::Stalled {
                rounds: round,
                max_violation: worst,
            })
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return RunResult {
                outcome,
                trace: sink.finish(),
                final_state: state,
                total_messages,
            };
        }
    }
    RunResult {
        outcome: Outcome::BudgetExceeded { rounds: config.budget },
        trace: sink.finish(),
        final_state: state,
        total_messages,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessageStats {
    pub rounds: Vec<usize>,
    pub per_round: Vec<usize>,
    pub cumulative: Vec<usize>,
    /// First round in which a neighbour's beacon reached each agent.
    pub first_assistance: Vec<Option<usize>>,
}

/// Message counts recomputed from the beacons in `trace`.
pub fn message_stats(trace: &[TraceRecord], comm: &Graph) -> MessageStats {
    let n = comm.node_count();
    let mut first_assistance = vec![None; n];
    let mut per_round = Vec::with_capacity(trace.len());
    let mut cumulative = Vec::with_capacity(trace.len());
    let mut total = 0;
    for rec in trace {
        let mut count = 0;
        for (sender, &l) in rec.lambda.iter().enumerate() {
            if l > 0.0 {
                count += comm.degree(sender);
                for &m in comm.neighbors(sender) {
                    first_assistance[m].get_or_insert(rec.round);
                }
            }
        }
        total += count;
        per_round.push(count);
        cumulative.push(total);
    }
    MessageStats {
        rounds: trace.iter().map(|r| r.round).collect(),
        per_round,
        cumulative,
        first_assistance,
    }
}

/// Checks the per-record protocol invariants on a trace: controls
/// nondecreasing and bounded by `u_upper`, beacons nonnegative and carried
/// only by saturated agents, and message counts matching the beacons.
pub fn check_trace_invariants(trace: &[TraceRecord], comm: &Graph, u_upper: &[f64]) -> std::result::Result<(), String> {
    for (k, rec) in trace.iter().enumerate() {
        if k > 0 {
            let prev = &trace[k - 1];
            if let Some(i) = (0..rec.u.len()).find(|&i| rec.u[i] < prev.u[i]) {
                return Err(format!("round {}: control {i} decreased", rec.round));
            }
        }
        for (i, &hi) in u_upper.iter().enumerate().take(rec.u.len()) {
            if rec.round > 0 && rec.u[i] > hi {
                return Err(format!("round {}: control {i} above its upper limit", rec.round));
            }
            if rec.lambda[i] < 0.0 {
                return Err(format!("round {}: negative beacon at {i}", rec.round));
            }
            if rec.lambda[i] > 0.0 && rec.u[i] != hi {
                return Err(format!("round {}: beacon at unsaturated agent {i}", rec.round));
            }
        }
        let expected: usize = (0..rec.lambda.len())
            .filter(|&i| rec.lambda[i] > 0.0)
            .map(|i| comm.degree(i))
            .sum();
        if rec.messages != expected {
            return Err(format!(
                "round {}: {} messages recorded, beacons imply {expected}",
                rec.round, rec.messages
            ));
        }
    }
    Ok(())
}

/// Agents that never see a violation yet move before any neighbour has
/// broadcast a beacon. Empty for a correct undecimated trace.
pub fn activation_order_violations(trace: &[TraceRecord], comm: &Graph) -> Vec<usize> {
    let n = comm.node_count();
    let first_beacon: Vec<Option<usize>> = (0..n)
        .map(|i| trace.iter().find(|r| r.lambda[i] > 0.0).map(|r| r.round))
        .collect();
    (0..n)
        .filter(|&i| trace.iter().all(|r| r.f[i] == 0.0))
        .filter(|&i| {
            let moved = trace
                .windows(2)
                .find(|w| w[1].u[i] != w[0].u[i])
                .map(|w| w[1].round);
            match moved {
                None => false,
                Some(t) => !comm
                    .neighbors(i)
                    .iter()
                    .any(|&m| first_beacon[m].is_some_and(|b| b < t)),
            }
        })
        .collect()
}

/// First round each agent's beacon was positive.
pub fn first_beacon_rounds(trace: &[TraceRecord]) -> Vec<Option<usize>> {
    let n = trace.first().map_or(0, |r| r.lambda.len());
    (0..n)
        .map(|i| trace.iter().find(|r| r.lambda[i] > 0.0).map(|r| r.round))
        .collect()
}

/// Normalized effort `(u − u(0)) / (ū − u(0))` per agent, zero where the
/// agent has no headroom.
pub fn normalized_effort(u: &[f64], u0: &[f64], u_upper: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(u0)
        .zip(u_upper)
        .map(|((&x, &x0), &hi)| if hi > x0 { (x - x0) / (hi - x0) } else { 0.0 })
        .collect()
}
