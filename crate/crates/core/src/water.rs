//! Water distribution hydraulics: nodal flow conservation plus monotone
//! per-edge pressure-drop laws.
//!
//! Edge `k` is oriented `from → to`; its flow `σ_k` is positive in that
//! direction and the edge law reads `π_from − π_to = ρ_k(σ_k)`. Node
//! injections satisfy `d_n = Σ_m σ_nm` (positive = supply, negative =
//! consumption). Pressures are in m, flows in m³/h.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;
use crate::plant::PlantModel;

/// Half-width of the linear segment that regularizes pipe laws at zero flow.
pub const FLOW_EPS: f64 = 1e-3;

pub const DARCY_WEISBACH: f64 = 2.0;
pub const HAZEN_WILLIAMS: f64 = 1.852;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PipeLaw {
    pub fn new(coefficient: f64, exponent: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "pipe coefficient must be positive, got {coefficient}"
            )));
        }
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "pipe exponent must be at least 1, got {exponent}"
            )));
        }
        Ok(Self {
            coefficient,
            exponent,
        })
    }

    pub fn darcy_weisbach(coefficient: f64) -> Result<Self> {
        Self::new(coefficient, DARCY_WEISBACH)
    }

    fn linear_slope(&self) -> f64 {
        self.coefficient * FLOW_EPS.powf(self.exponent - 1.0)
    }

    /// Friction drop `c · sign(σ) · |σ|^e`, linear for `|σ| < FLOW_EPS`.
    pub fn drop(&self, sigma: f64) -> f64 {
        if sigma.abs() < FLOW_EPS {
            self.linear_slope() * sigma
        } else {
            self.coefficient * sigma.signum() * sigma.abs().powf(self.exponent)
        }
    }

    /// Derivative of [`PipeLaw::drop`]; strictly positive everywhere.
    pub fn slope(&self, sigma: f64) -> f64 {
        if sigma.abs() < FLOW_EPS {
            self.linear_slope()
        } else {
            self.coefficient * self.exponent * sigma.abs().powf(self.exponent - 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeLaw {
    Pipe(PipeLaw),
    /// Fixed-speed pump adding `gain` metres of head in the `from → to`
    /// direction, optionally in series with a pipe.
    Pump { gain: f64, series: Option<PipeLaw> },
}

impl EdgeLaw {
    fn validate(&self) -> Result<()> {
        match self {
            EdgeLaw::Pipe(p) => PipeLaw::new(p.coefficient, p.exponent).map(|_| ()),
            EdgeLaw::Pump { gain, series } => {
                if !(*gain >= 0.0 && gain.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "pump gain must be nonnegative, got {gain}"
                    )));
                }
                if let Some(p) = series {
                    PipeLaw::new(p.coefficient, p.exponent)?;
                }
                Ok(())
            }
        }
    }

    fn slope(&self, sigma: f64) -> f64 {
        match self {
            EdgeLaw::Pipe(p) => p.slope(sigma),
            EdgeLaw::Pump { series, .. } => series.map_or(0.0, |p| p.slope(sigma)),
        }
    }
}

/// Pressure drop `π_from − π_to` across an edge carrying flow `sigma`.
pub fn edge_pressure_drop(sigma: f64, law: &EdgeLaw) -> f64 {
    match law {
        EdgeLaw::Pipe(p) => p.drop(sigma),
        EdgeLaw::Pump { gain, series } => series.map_or(0.0, |p| p.drop(sigma)) - gain,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterEdge {
    pub from: usize,
    pub to: usize,
    pub law: EdgeLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeControl {
    /// Reservoir or tank whose pressure head is the control.
    FixedPressure,
    /// Node whose injection (negative for consumption) is the control.
    Injection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterNode {
    pub control: NodeControl,
    /// Nominal control value.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Pressure floor; `Some` marks the node as measured.
    pub pressure_min: Option<f64>,
}

impl WaterNode {
    pub fn fixed(pressure: f64, lower: f64, upper: f64) -> Self {
        Self {
            control: NodeControl::FixedPressure,
            value: pressure,
            lower,
            upper,
            pressure_min: None,
        }
    }

    pub fn injection(value: f64, lower: f64, upper: f64, pressure_min: Option<f64>) -> Self {
        Self {
            control: NodeControl::Injection,
            value,
            lower,
            upper,
            pressure_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydraulicOptions {
    pub tol: f64,
    /// Residual accepted if Newton stagnates before reaching `tol`.
    pub accept_tol: f64,
    pub max_iter: usize,
}

impl Default for HydraulicOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            accept_tol: 1e-7,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicSolution {
    pub pressures: Vec<f64>,
    /// Per-edge flow in the edge's orientation.
    pub flows: Vec<f64>,
    /// Net outflow `Σ_m σ_nm` at every node.
    pub injections: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterModel {
    nodes: Vec<WaterNode>,
    edges: Vec<WaterEdge>,
    graph: Graph,
    fixed: Vec<usize>,
    free: Vec<usize>,
    /// Position of each node in `free`, if free.
    free_index: Vec<Option<usize>>,
    measured: Vec<usize>,
    u_lower: Vec<f64>,
    u_upper: Vec<f64>,
    y_lower: Vec<f64>,
    options: HydraulicOptions,
}

impl WaterModel {
    pub fn new(nodes: Vec<WaterNode>, edges: Vec<WaterEdge>) -> Result<Self> {
        let n = nodes.len();
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.from, e.to)).collect();
        let graph = Graph::new(n, &pairs)?;
        for e in &edges {
            e.law.validate()?;
            if let EdgeLaw::Pump { series: None, .. } = e.law {
                return Err(Error::InvalidModel(format!(
                    "pump {} → {} needs a series pipe for the network solve",
                    e.from, e.to
                )));
            }
        }
        let fixed: Vec<usize> = (0..n)
            .filter(|&i| nodes[i].control == NodeControl::FixedPressure)
            .collect();
        let free: Vec<usize> = (0..n)
            .filter(|&i| nodes[i].control == NodeControl::Injection)
            .collect();
        if fixed.is_empty() {
            return Err(Error::InvalidModel("no fixed-pressure node".into()));
        }
        let reached = graph.reachable_from(&fixed);
        if let Some(node) = free.iter().find(|&&i| !reached[i]) {
            return Err(Error::InvalidModel(format!(
                "node {node} is disconnected from every pressure reference"
            )));
        }
        let mut free_index = vec![None; n];
        for (k, &i) in free.iter().enumerate() {
            free_index[i] = Some(k);
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.lower.is_nan() || node.upper.is_nan() || node.lower > node.upper || !node.value.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "node {i}: invalid control range [{}, {}]",
                    node.lower, node.upper
                )));
            }
            if node.control == NodeControl::FixedPressure && node.pressure_min.is_some() {
                return Err(Error::InvalidModel(format!(
                    "node {i}: fixed-pressure nodes cannot carry a pressure floor"
                )));
            }
        }
        let measured: Vec<usize> = (0..n).filter(|&i| nodes[i].pressure_min.is_some()).collect();
        let y_lower = measured
            .iter()
            .map(|&i| nodes[i].pressure_min.unwrap_or(f64::NEG_INFINITY))
            .collect();
        Ok(Self {
            u_lower: nodes.iter().map(|x| x.lower).collect(),
            u_upper: nodes.iter().map(|x| x.upper).collect(),
            nodes,
            edges,
            graph,
            fixed,
            free,
            free_index,
            measured,
            y_lower,
            options: HydraulicOptions::default(),
        })
    }

    pub fn with_options(mut self, options: HydraulicOptions) -> Self {
        self.options = options;
        self
    }

    pub fn nodes(&self) -> &[WaterNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[WaterEdge] {
        &self.edges
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn nominal_control(&self) -> Vec<f64> {
        self.nodes.iter().map(|x| x.value).collect()
    }

    /// Solves for pressures and flows at control `u` (fixed pressures on
    /// reference nodes, injections elsewhere) by Newton iteration on the
    /// joint flow/pressure system, eliminating flows through a Schur
    /// complement at each step.
    pub fn solve_network(&self, u: &[f64]) -> Result<HydraulicSolution> {
        let n = self.nodes.len();
        check_len(n, u.len())?;
        let ne = self.edges.len();
        let nf = self.free.len();
        let opts = self.options;

        // A_f (ne × nf) incidence restricted to free nodes; `offset` holds the
        // fixed-pressure contribution.
        let mut a_f = DMatrix::<f64>::zeros(ne, nf);
        let mut offset = DVector::<f64>::zeros(ne);
        for (k, e) in self.edges.iter().enumerate() {
            for (node, sign) in [(e.from, 1.0), (e.to, -1.0)] {
                match self.free_index[node] {
                    Some(j) => a_f[(k, j)] = sign,
                    None => offset[k] += sign * u[node],
                }
            }
        }
        let demand = DVector::from_iterator(nf, self.free.iter().map(|&i| u[i]));

        let residual = |sigma: &DVector<f64>, p: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
            let drop = DVector::from_iterator(
                ne,
                self.edges
                    .iter()
                    .zip(sigma.iter())
                    .map(|(e, &s)| edge_pressure_drop(s, &e.law)),
            );
            let r1 = drop - (&a_f * p + &offset);
            let r2 = a_f.transpose() * sigma - &demand;
            (r1, r2)
        };
        let norm2 = |r1: &DVector<f64>, r2: &DVector<f64>| (r1.norm_squared() + r2.norm_squared()).sqrt();
        let norm_inf = |r1: &DVector<f64>, r2: &DVector<f64>| r1.amax().max(r2.amax());

        let start = self.fixed.iter().map(|&i| u[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut sigma = DVector::from_element(ne, 1.0);
        let mut p = DVector::from_element(nf, start);
        let (mut r1, mut r2) = residual(&sigma, &p);
        let mut res = norm_inf(&r1, &r2);
        let mut iterations = 0;
        while res > opts.tol && iterations < opts.max_iter {
            iterations += 1;
            let d_inv = DVector::from_iterator(
                ne,
                self.edges.iter().zip(sigma.iter()).map(|(e, &s)| 1.0 / e.law.slope(s)),
            );
            let scaled = DMatrix::from_fn(ne, nf, |k, j| a_f[(k, j)] * d_inv[k]);
            let schur = a_f.transpose() * &scaled;
            let rhs = scaled.transpose() * &r1 - &r2;
            let dp = match schur.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => schur.lu().solve(&rhs).ok_or(Error::SingularJacobian)?,
            };
            let ds = (&a_f * &dp - &r1).component_mul(&d_inv);

            let base = norm2(&r1, &r2);
            let mut t = 1.0;
            let (mut ns, mut np, mut nr1, mut nr2);
            loop {
                ns = &sigma + t * &ds;
                np = &p + t * &dp;
                (nr1, nr2) = residual(&ns, &np);
                if norm2(&nr1, &nr2) < (1.0 - 1e-4 * t) * base || t < 1e-6 {
                    break;
                }
                t *= 0.5;
            }
            let next = norm_inf(&nr1, &nr2);
            if !next.is_finite() {
                break;
            }
            let stalled = next >= res;
            sigma = ns;
            p = np;
            r1 = nr1;
            r2 = nr2;
            res = next;
            if stalled && res <= opts.accept_tol {
                break;
            }
        }
        if res.is_nan() || res > opts.accept_tol {
            return Err(Error::HydraulicInfeasible {
                iterations,
                residual: res,
            });
        }

        let mut pressures = vec![0.0; n];
        for &i in &self.fixed {
            pressures[i] = u[i];
        }
        for (j, &i) in self.free.iter().enumerate() {
            pressures[i] = p[j];
        }
        let flows: Vec<f64> = sigma.iter().copied().collect();
        let mut injections = vec![0.0; n];
        for (e, &s) in self.edges.iter().zip(&flows) {
            injections[e.from] += s;
            injections[e.to] -= s;
        }
        for (e, &s) in self.edges.iter().zip(&flows) {
            if matches!(e.law, EdgeLaw::Pump { .. }) && s < -opts.accept_tol {
                return Err(Error::InvalidOperatingPoint(format!(
                    "reverse flow {s:.6} through pump {} → {}",
                    e.from, e.to
                )));
            }
        }
        Ok(HydraulicSolution {
            pressures,
            flows,
            injections,
            residual: res,
            iterations,
        })
    }

    /// Copy without the edge joining `a` and `b` (either orientation).
    pub fn without_edge(&self, a: usize, b: usize) -> Result<Self> {
        let idx = self.find_edge(a, b)?;
        let mut edges = self.edges.clone();
        edges.remove(idx);
        self.rebuild(self.nodes.clone(), edges)
    }

    /// Copy with the pipe coefficient on edge `{a, b}` (or its series pipe,
    /// for a pump) replaced.
    pub fn with_pipe_coefficient(&self, a: usize, b: usize, value: f64) -> Result<Self> {
        let idx = self.find_edge(a, b)?;
        let mut edges = self.edges.clone();
        match &mut edges[idx].law {
            EdgeLaw::Pipe(p) => p.coefficient = value,
            EdgeLaw::Pump { series: Some(p), .. } => p.coefficient = value,
            EdgeLaw::Pump { series: None, .. } => unreachable!("rejected at construction"),
        }
        self.rebuild(self.nodes.clone(), edges)
    }

    /// Copy with the nominal control at `node` replaced by `f(value)`; the
    /// control range moves with it so the available flexibility is kept.
    pub fn with_control(&self, node: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        let x = nodes
            .get_mut(node)
            .ok_or_else(|| Error::InvalidScenario(format!("node {node} does not exist")))?;
        let delta = f(x.value) - x.value;
        x.value += delta;
        x.lower += delta;
        x.upper += delta;
        self.rebuild(nodes, self.edges.clone())
    }

    /// Copy with the source at `node` shut off: zero injection, no
    /// flexibility. A fixed-pressure node becomes an injection node.
    pub fn without_source(&self, node: usize) -> Result<Self> {
        let mut nodes = self.nodes.clone();
        let x = nodes
            .get_mut(node)
            .ok_or_else(|| Error::InvalidScenario(format!("node {node} does not exist")))?;
        x.control = NodeControl::Injection;
        x.value = 0.0;
        x.lower = 0.0;
        x.upper = 0.0;
        self.rebuild(nodes, self.edges.clone())
    }

    fn find_edge(&self, a: usize, b: usize) -> Result<usize> {
        self.edges
            .iter()
            .position(|e| (e.from, e.to) == (a, b) || (e.from, e.to) == (b, a))
            .ok_or_else(|| Error::InvalidScenario(format!("no edge between nodes {a} and {b}")))
    }

    fn rebuild(&self, nodes: Vec<WaterNode>, edges: Vec<WaterEdge>) -> Result<Self> {
        Ok(WaterModel::new(nodes, edges)?.with_options(self.options))
    }
}

/// True iff raising the controls from `u_low` to `u_high` does not lower any
/// measured pressure by more than 1e-6.
pub fn lemma1_monotonicity_test(model: &WaterModel, u_high: &[f64], u_low: &[f64]) -> Result<bool> {
    check_len(u_high.len(), u_low.len())?;
    if u_high.iter().zip(u_low).any(|(a, b)| a < b) {
        return Err(Error::InvalidOperatingPoint(
            "control vectors are not ordered element-wise".into(),
        ));
    }
    let hi = model.solve(u_high)?;
    let lo = model.solve(u_low)?;
    Ok(hi.iter().zip(&lo).all(|(a, b)| *a >= b - 1e-6))
}

impl PlantModel for WaterModel {
    fn control_dim(&self) -> usize {
        self.nodes.len()
    }

    fn measured(&self) -> &[usize] {
        &self.measured
    }

    fn u_lower(&self) -> &[f64] {
        &self.u_lower
    }

    fn u_upper(&self) -> &[f64] {
        &self.u_upper
    }

    fn y_lower(&self) -> &[f64] {
        &self.y_lower
    }

    fn solve(&self, u: &[f64]) -> Result<Vec<f64>> {
        let sol = self.solve_network(u)?;
        Ok(self.measured.iter().map(|&i| sol.pressures[i]).collect())
    }
}
