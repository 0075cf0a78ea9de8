//! JSON scenario files (`"schema": "ripple-scenario/1"`).
//!
//! Nodes are referenced by string labels; the order of the plant's node list
//! fixes the agent indices. Power plants are in per-unit, water plants in m
//! and m³/h. See `scenarios/` for complete examples.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::plant::LinearPlant;
use crate::power::{BusKind, GridModel};
use crate::sim::{DemandChange, DisruptionEvent, GainChoice, GainSettings, RunConfig, Scenario, ScenarioPlant};
use crate::water::{EdgeLaw, NodeControl, PipeLaw, WaterEdge, WaterModel, WaterNode};

pub const SCHEMA: &str = "ripple-scenario/1";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{message}", location.map(|(l, c)| format!("line {l}, column {c}: ")).unwrap_or_default())]
    Invalid {
        message: String,
        location: Option<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub plant: PlantSpec,
    pub comm_graph: CommGraphSpec,
    #[serde(default = "GainsSpec::auto")]
    pub gains: GainsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disruption: Vec<DisruptionSpec>,
    #[serde(default)]
    pub run: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlantSpec {
    Power(PowerSpec),
    Water(WaterSpec),
    Linear(LinearSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    /// Must be `"per_unit"`.
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_mva: Option<f64>,
    pub buses: Vec<BusSpec>,
    pub lines: Vec<LineSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BusSpec {
    Generator {
        label: String,
        v_set: f64,
        v_min: f64,
        v_max: f64,
    },
    Load {
        label: String,
        q: f64,
        #[serde(default)]
        q_flex: f64,
        v_min: f64,
    },
}

impl BusSpec {
    fn label(&self) -> &str {
        match self {
            BusSpec::Generator { label, .. } | BusSpec::Load { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: String,
    pub to: String,
    pub susceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterUnits {
    /// Must be `"m"`.
    pub pressure: String,
    /// Must be `"m3/h"`.
    pub flow: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterSpec {
    pub units: WaterUnits,
    pub nodes: Vec<WaterNodeSpec>,
    pub edges: Vec<WaterEdgeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Reservoir,
    Tank,
    Junction,
    Consumer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSpec {
    Pressure,
    Injection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterNodeSpec {
    pub label: String,
    pub role: NodeRole,
    pub control: ControlSpec,
    pub value: f64,
    /// Control range; defaults to the fixed value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeSpec {
    pub coefficient: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    crate::water::DARCY_WEISBACH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaterEdgeSpec {
    Pipe {
        from: String,
        to: String,
        coefficient: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
    Pump {
        from: String,
        to: String,
        gain: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<PipeSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub units: String,
    pub agents: Vec<AgentSpec>,
    pub outputs: Vec<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub label: String,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Agent whose output this is.
    pub node: String,
    #[serde(default)]
    pub offset: f64,
    pub y_min: f64,
    /// `∂y / ∂u_label`; omitted entries are zero.
    pub sensitivity: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommGraphSpec {
    pub edges: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainValue {
    Auto(Auto),
    Scalar(f64),
    /// One entry per node, in plant node order.
    Vector(Vec<f64>),
}

impl Default for GainValue {
    fn default() -> Self {
        GainValue::Auto(Auto::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainsSpec {
    Auto(Auto),
    Explicit {
        #[serde(default)]
        eta1: GainValue,
        #[serde(default)]
        eta2: GainValue,
        #[serde(default)]
        eta3: GainValue,
    },
}

impl GainsSpec {
    fn auto() -> Self {
        GainsSpec::Auto(Auto::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Initial control per label; unlisted nodes start at their nominal value.
    pub u0: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeMode {
    Scale,
    Set,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisruptionSpec {
    EdgeRemoval { edge: [String; 2] },
    SourceOutage { node: String },
    DemandChange { nodes: Vec<String>, mode: ChangeMode, value: f64 },
    ParameterChange { edge: [String; 2], value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub budget: usize,
    pub eps_eq: f64,
    pub eps_feas: f64,
    pub trace_decimation: usize,
    pub seed: u64,
    pub override_gain_check: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        let c = RunConfig::default();
        Self {
            budget: c.budget,
            eps_eq: c.eps_eq,
            eps_feas: c.eps_feas,
            trace_decimation: c.decimation,
            seed: c.seed,
            override_gain_check: c.override_gain_check,
        }
    }
}

/// Line and column of the first occurrence of `"needle"` in `text`.
fn locate(text: &str, needle: &str) -> Option<(usize, usize)> {
    let quoted = format!("\"{needle}\"");
    let offset = text.find(&quoted)?;
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    Some((line, column))
}

struct Ctx<'a> {
    text: Option<&'a str>,
    index: HashMap<String, usize>,
}

impl Ctx<'_> {
    fn invalid(&self, message: impl Into<String>, near: &str) -> ScenarioError {
        ScenarioError::Invalid {
            message: message.into(),
            location: self.text.and_then(|t| locate(t, near)),
        }
    }

    fn node(&self, label: &str) -> Result<usize, ScenarioError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| self.invalid(format!("unknown node label \"{label}\""), label))
    }
}

fn model_error(ctx: &Ctx, err: crate::Error, near: &str) -> ScenarioError {
    ctx.invalid(err.to_string(), near)
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    pub fn labels(&self) -> Vec<String> {
        match &self.plant {
            PlantSpec::Power(p) => p.buses.iter().map(|b| b.label().to_string()).collect(),
            PlantSpec::Water(w) => w.nodes.iter().map(|n| n.label.clone()).collect(),
            PlantSpec::Linear(l) => l.agents.iter().map(|a| a.label.clone()).collect(),
        }
    }

    /// Builds the in-memory scenario. `text` is the source the file was
    /// parsed from, used to point diagnostics at the offending token.
    pub fn to_scenario(&self, text: Option<&str>) -> Result<Scenario, ScenarioError> {
        let labels = self.labels();
        let mut ctx = Ctx {
            text,
            index: HashMap::new(),
        };
        if self.schema != SCHEMA {
            return Err(ctx.invalid(
                format!("unsupported schema \"{}\", expected \"{SCHEMA}\"", self.schema),
                "schema",
            ));
        }
        for (i, l) in labels.iter().enumerate() {
            if ctx.index.insert(l.clone(), i).is_some() {
                return Err(ctx.invalid(format!("duplicate node label \"{l}\""), l));
            }
        }
        let plant = match &self.plant {
            PlantSpec::Power(p) => ScenarioPlant::Power(build_power(&ctx, p)?),
            PlantSpec::Water(w) => ScenarioPlant::Water(build_water(&ctx, w)?),
            PlantSpec::Linear(l) => ScenarioPlant::Linear(build_linear(&ctx, l)?),
        };

        let mut edges = Vec::with_capacity(self.comm_graph.edges.len());
        for [a, b] in &self.comm_graph.edges {
            edges.push((ctx.node(a)?, ctx.node(b)?));
        }
        let comm = Graph::new(labels.len(), &edges).map_err(|e| model_error(&ctx, e, "comm_graph"))?;

        let n = labels.len();
        let gains = match &self.gains {
            GainsSpec::Auto(_) => GainSettings::auto(),
            GainsSpec::Explicit { eta1, eta2, eta3 } => GainSettings {
                eta1: gain_choice(&ctx, eta1, n, "eta1")?,
                eta2: gain_choice(&ctx, eta2, n, "eta2")?,
                eta3: gain_choice(&ctx, eta3, n, "eta3")?,
            },
        };

        let disruption = self
            .disruption
            .iter()
            .map(|d| disruption_event(&ctx, d))
            .collect::<Result<Vec<_>, _>>()?;

        let u0 = match &self.initial {
            None => None,
            Some(init) => {
                // Unlisted nodes take the nominal control of the disrupted plant.
                let disrupted = disruption
                    .iter()
                    .try_fold(plant.clone(), |p, e| crate::sim::apply_disruption(&p, e))
                    .map_err(|e| model_error(&ctx, e, "disruption"))?;
                let mut u = disrupted.nominal_control();
                for (label, &v) in &init.u0 {
                    u[ctx.node(label)?] = v;
                }
                Some(u)
            }
        };

        let r = &self.run;
        if r.trace_decimation == 0 {
            return Err(ctx.invalid("trace_decimation must be at least 1", "trace_decimation"));
        }
        if !(r.eps_eq > 0.0 && r.eps_feas > 0.0) {
            return Err(ctx.invalid("tolerances must be positive", "run"));
        }
        let config = RunConfig {
            budget: r.budget,
            eps_eq: r.eps_eq,
            eps_feas: r.eps_feas,
            decimation: r.trace_decimation,
            override_gain_check: r.override_gain_check,
            seed: r.seed,
        };
        Ok(Scenario {
            name: self.name.clone(),
            labels,
            plant,
            comm,
            gains,
            u0,
            disruption,
            config,
        })
    }
}

fn gain_choice(ctx: &Ctx, v: &GainValue, n: usize, name: &str) -> Result<GainChoice, ScenarioError> {
    match v {
        GainValue::Auto(_) => Ok(GainChoice::Auto),
        GainValue::Scalar(x) => Ok(GainChoice::Scalar(*x)),
        GainValue::Vector(xs) if xs.len() == n => Ok(GainChoice::Vector(xs.clone())),
        GainValue::Vector(xs) => Err(ctx.invalid(
            format!("{name} has {} entries, plant has {n} nodes", xs.len()),
            name,
        )),
    }
}

fn build_power(ctx: &Ctx, p: &PowerSpec) -> Result<GridModel, ScenarioError> {
    if p.units != "per_unit" {
        return Err(ctx.invalid(
            format!("power plants must use \"per_unit\" units, got \"{}\"", p.units),
            "units",
        ));
    }
    let buses = p
        .buses
        .iter()
        .map(|b| match *b {
            BusSpec::Generator { v_set, v_min, v_max, .. } => BusKind::Generator { v_set, v_min, v_max },
            BusSpec::Load { q, q_flex, v_min, .. } => BusKind::Load { q, q_flex, v_min },
        })
        .collect();
    let mut edges = Vec::with_capacity(p.lines.len());
    for l in &p.lines {
        edges.push((ctx.node(&l.from)?, ctx.node(&l.to)?));
    }
    let graph = Graph::new(p.buses.len(), &edges).map_err(|e| model_error(ctx, e, "lines"))?;
    let sus = p.lines.iter().map(|l| l.susceptance).collect();
    GridModel::new(graph, sus, buses).map_err(|e| model_error(ctx, e, "buses"))
}

fn build_water(ctx: &Ctx, w: &WaterSpec) -> Result<WaterModel, ScenarioError> {
    if w.units.pressure != "m" || w.units.flow != "m3/h" {
        return Err(ctx.invalid(
            "water plants must use \"m\" for pressure and \"m3/h\" for flow",
            "units",
        ));
    }
    let nodes = w
        .nodes
        .iter()
        .map(|n| WaterNode {
            control: match n.control {
                ControlSpec::Pressure => NodeControl::FixedPressure,
                ControlSpec::Injection => NodeControl::Injection,
            },
            value: n.value,
            lower: n.min.unwrap_or(n.value),
            upper: n.max.unwrap_or(n.value),
            pressure_min: n.pressure_min,
        })
        .collect();
    let mut edges = Vec::with_capacity(w.edges.len());
    for e in &w.edges {
        let (from, to, law) = match e {
            WaterEdgeSpec::Pipe { from, to, coefficient, exponent } => (
                from,
                to,
                EdgeLaw::Pipe(PipeLaw { coefficient: *coefficient, exponent: *exponent }),
            ),
            WaterEdgeSpec::Pump { from, to, gain, series } => (
                from,
                to,
                EdgeLaw::Pump {
                    gain: *gain,
                    series: series.map(|s| PipeLaw { coefficient: s.coefficient, exponent: s.exponent }),
                },
            ),
        };
        edges.push(WaterEdge {
            from: ctx.node(from)?,
            to: ctx.node(to)?,
            law,
        });
    }
    WaterModel::new(nodes, edges).map_err(|e| model_error(ctx, e, "edges"))
}

fn build_linear(ctx: &Ctx, l: &LinearSpec) -> Result<LinearPlant, ScenarioError> {
    let n = l.agents.len();
    let m = l.outputs.len();
    let mut s = nalgebra::DMatrix::zeros(m, n);
    let mut measured = Vec::with_capacity(m);
    for (k, o) in l.outputs.iter().enumerate() {
        measured.push(ctx.node(&o.node)?);
        for (label, &v) in &o.sensitivity {
            s[(k, ctx.node(label)?)] = v;
        }
    }
    let plant = LinearPlant::new(
        s,
        l.outputs.iter().map(|o| o.offset).collect(),
        measured,
        l.agents.iter().map(|a| a.min).collect(),
        l.agents.iter().map(|a| a.max).collect(),
        l.outputs.iter().map(|o| o.y_min).collect(),
    )
    .map_err(|e| model_error(ctx, e, "agents"))?;
    plant
        .with_nominal(l.agents.iter().map(|a| a.nominal.unwrap_or(a.min)).collect())
        .map_err(|e| model_error(ctx, e, "agents"))
}

fn disruption_event(ctx: &Ctx, d: &DisruptionSpec) -> Result<DisruptionEvent, ScenarioError> {
    Ok(match d {
        DisruptionSpec::EdgeRemoval { edge: [a, b] } => DisruptionEvent::EdgeRemoval {
            a: ctx.node(a)?,
            b: ctx.node(b)?,
        },
        DisruptionSpec::SourceOutage { node } => DisruptionEvent::SourceOutage { node: ctx.node(node)? },
        DisruptionSpec::DemandChange { nodes, mode, value } => DisruptionEvent::DemandChange {
            nodes: nodes.iter().map(|l| ctx.node(l)).collect::<Result<_, _>>()?,
            change: match mode {
                ChangeMode::Scale => DemandChange::Scale(*value),
                ChangeMode::Set => DemandChange::Set(*value),
            },
        },
        DisruptionSpec::ParameterChange { edge: [a, b], value } => DisruptionEvent::ParameterChange {
            a: ctx.node(a)?,
            b: ctx.node(b)?,
            value: *value,
        },
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    ScenarioFile::from_json(text)?.to_scenario(Some(text))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CASCADE: &str = r#"{
  "schema": "ripple-scenario/1",
  "name": "cascade",
  "plant": {
    "type": "linear",
    "units": "arbitrary",
    "agents": [
      {"label": "a", "min": 0, "max": 0.5},
      {"label": "b", "min": 0, "max": 1}
    ],
    "outputs": [
      {"node": "a", "y_min": 1, "sensitivity": {"a": 1, "b": 1}}
    ]
  },
  "comm_graph": {"edges": [["a", "b"]]},
  "gains": {"eta1": 1, "eta2": 1, "eta3": 1},
  "run": {"override_gain_check": true}
}"#;

    #[test]
    fn parses_linear_scenario() {
        let sc = parse_scenario(CASCADE).unwrap();
        assert_eq!(sc.labels, vec!["a", "b"]);
        assert_eq!(sc.gains.eta2, GainChoice::Scalar(1.0));
        assert!(sc.config.override_gain_check);
        assert_eq!(sc.config.budget, 100_000);
        let res = crate::sim::run(&sc).unwrap();
        assert!(matches!(res.outcome, crate::sim::Outcome::Converged { .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let broken = CASCADE.replace("\"max\": 1}", "\"max\": }");
        match parse_scenario(&broken) {
            Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 9),
            other => panic!("expected syntax error, got {other:?}"),
        }
        let unknown = CASCADE.replace("\"units\": \"arbitrary\"", "\"units\": \"arbitrary\", \"colour\": 1");
        assert!(matches!(parse_scenario(&unknown), Err(ScenarioError::Syntax { .. })));
    }

    #[test]
    fn unknown_labels_are_located() {
        let bad = CASCADE.replace("[\"a\", \"b\"]", "[\"a\", \"zz\"]");
        match parse_scenario(&bad) {
            Err(ScenarioError::Invalid { location: Some((line, _)), message }) => {
                assert_eq!(line, 15);
                assert!(message.contains("zz"));
            }
            other => panic!("expected located error, got {other:?}"),
        }
        let schema = CASCADE.replace("ripple-scenario/1", "ripple-scenario/9");
        assert!(matches!(parse_scenario(&schema), Err(ScenarioError::Invalid { .. })));
    }

    #[test]
    fn auto_gains_and_partial_initial_state() {
        let text = CASCADE
            .replace("{\"eta1\": 1, \"eta2\": 1, \"eta3\": 1}", "\"auto\"")
            .replace("\"run\"", "\"initial\": {\"u0\": {\"b\": 0.25}},\n  \"run\"");
        let sc = parse_scenario(&text).unwrap();
        assert_eq!(sc.gains, GainSettings::auto());
        assert_eq!(sc.u0, Some(vec![0.0, 0.25]));
    }

    fn arb_linear_file() -> impl Strategy<Value = ScenarioFile> {
        (1usize..5).prop_flat_map(|n| {
            (
                proptest::collection::vec((0.0..1.0f64, 1.0..2.0f64), n),
                proptest::collection::vec(proptest::option::of(0.1..5.0f64), n),
                0.0..1.5f64,
                1usize..4,
            )
                .prop_map(move |(limits, sens, y_min, dec)| {
                    let labels: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
                    let agents = labels
                        .iter()
                        .zip(&limits)
                        .map(|(l, &(lo, hi))| AgentSpec { label: l.clone(), min: lo, max: hi, nominal: None })
                        .collect();
                    let sensitivity = labels
                        .iter()
                        .zip(&sens)
                        .filter_map(|(l, s)| s.map(|v| (l.clone(), v)))
                        .collect();
                    ScenarioFile {
                        schema: SCHEMA.into(),
                        name: "generated".into(),
                        description: None,
                        plant: PlantSpec::Linear(LinearSpec {
                            units: "arbitrary".into(),
                            agents,
                            outputs: vec![OutputSpec { node: labels[0].clone(), offset: 0.0, y_min, sensitivity }],
                        }),
                        comm_graph: CommGraphSpec {
                            edges: (1..n).map(|i| [labels[i - 1].clone(), labels[i].clone()]).collect(),
                        },
                        gains: GainsSpec::Explicit {
                            eta1: GainValue::Scalar(0.5),
                            eta2: GainValue::Vector(vec![0.25; n]),
                            eta3: GainValue::Auto(Auto::Auto),
                        },
                        initial: None,
                        disruption: vec![DisruptionSpec::DemandChange {
                            nodes: vec![labels[0].clone()],
                            mode: ChangeMode::Scale,
                            value: 2.0,
                        }],
                        run: RunSpec { trace_decimation: dec, ..RunSpec::default() },
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn reserialized_scenarios_load_identically(file in arb_linear_file()) {
            let first = file.to_scenario(None).unwrap();
            let text = file.to_json();
            let again = parse_scenario(&text).unwrap();
            prop_assert_eq!(first, again);
        }
    }
}
