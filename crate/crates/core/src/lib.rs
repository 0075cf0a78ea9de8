//! Saturation-driven distributed control over monotone networked plants.
//!
//! Agents raise their controls until local output limits are met; agents
//! that hit their own upper limits broadcast beacons that recruit
//! neighbours. The crate ships two physical plants (a reactive-power grid
//! and a water distribution network), the protocol, and a simulation
//! harness with scenario files.

pub mod error;
pub mod graph;
pub mod linalg;
pub mod plant;
pub mod power;
pub mod ripple;
pub mod scenario_file;
pub mod sim;
pub mod synthetic;
pub mod water;

pub use error::{Error, Result};
pub use graph::Graph;
pub use plant::{
    default_probe_step, feasibility_check, max_effort_feasibility, monotonicity_probe, LinearPlant,
    MonotonicityProbe, PlantModel, DEFAULT_FEAS_TOL, MONOTONICITY_TOL,
};
pub use power::{BusKind, GridModel, PowerFlowOptions, PowerFlowSolution, SweepRow};
pub use ripple::{
    gain_condition, is_equilibrium, Message, Protocol, ProtocolGains, ProtocolState, RoundMessages,
};
pub use sim::{
    apply_disruption, message_stats, run, run_batch, run_protocol, DemandChange, DisruptionEvent,
    GainChoice, GainSettings, MessageStats, Outcome, PreparedScenario, RunConfig, RunResult,
    Scenario, ScenarioPlant, TraceRecord,
};
pub use water::{
    edge_pressure_drop, lemma1_monotonicity_test, EdgeLaw, HydraulicSolution, NodeControl,
    PipeLaw, WaterEdge, WaterModel, WaterNode,
};
