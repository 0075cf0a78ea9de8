//! The saturation-driven ripple protocol.
//!
//! Each round every agent reads its output, computes a violation, moves its
//! control towards a target that also absorbs beacons from saturated
//! neighbours, emits its own beacon if the target overshoots its upper
//! limit, and projects back onto the limit.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;
use crate::linalg::{inf_norm, spectral_norm};

/// Relative tolerance of the power iteration behind [`gain_condition`].
pub const GAIN_NORM_TOL: f64 = 1e-9;
const GAIN_NORM_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolGains {
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub eta3: Vec<f64>,
}

impl ProtocolGains {
    pub fn new(eta1: Vec<f64>, eta2: Vec<f64>, eta3: Vec<f64>) -> Result<Self> {
        check_len(eta1.len(), eta2.len())?;
        check_len(eta1.len(), eta3.len())?;
        for (name, v) in [("eta1", &eta1), ("eta2", &eta2), ("eta3", &eta3)] {
            if let Some(bad) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidScenario(format!(
                    "{name} entries must be positive, got {bad}"
                )));
            }
        }
        Ok(Self { eta1, eta2, eta3 })
    }

    pub fn uniform(n: usize, eta1: f64, eta2: f64, eta3: f64) -> Result<Self> {
        Self::new(vec![eta1; n], vec![eta2; n], vec![eta3; n])
    }

    pub fn len(&self) -> usize {
        self.eta1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta1.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolState {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub round: usize,
}

impl ProtocolState {
    /// Round-0 state with all beacons silent.
    pub fn initial(u0: Vec<f64>) -> Self {
        let n = u0.len();
        Self {
            u: u0,
            lambda: vec![0.0; n],
            round: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundMessages {
    pub messages: Vec<Message>,
}

impl RoundMessages {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// `f_n = max(0, y̲_n − y_n)` on measured nodes, zero elsewhere. `y` and
/// `y_lower` are indexed like `measured`.
pub fn violation(y: &[f64], y_lower: &[f64], measured: &[usize], n: usize) -> Vec<f64> {
    let mut f = vec![0.0; n];
    for ((&node, &yi), &lo) in measured.iter().zip(y).zip(y_lower) {
        f[node] = (lo - yi).max(0.0);
    }
    f
}

/// `A λ`: the sum of beacons each agent hears from its neighbours.
pub fn neighbor_beacon_sum(graph: &Graph, lambda: &[f64]) -> Vec<f64> {
    (0..graph.node_count())
        .map(|n| graph.neighbors(n).iter().map(|&m| lambda[m]).sum())
        .collect()
}

/// `x̂ = u + diag(η₁) f + diag(η₂) A λ`.
pub fn target_setpoint(u: &[f64], f: &[f64], beacon_sum: &[f64], gains: &ProtocolGains) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(n, &un)| un + gains.eta1[n] * f[n] + gains.eta2[n] * beacon_sum[n])
        .collect()
}

/// `λ = max(0, diag(η₃)(x̂ − ū))`.
pub fn beacon_update(x_hat: &[f64], u_upper: &[f64], eta3: &[f64]) -> Vec<f64> {
    x_hat
        .iter()
        .zip(u_upper)
        .zip(eta3)
        .map(|((&x, &hi), &e)| (e * (x - hi)).max(0.0))
        .collect()
}

/// `u = min(x̂, ū)`.
pub fn project(x_hat: &[f64], u_upper: &[f64]) -> Vec<f64> {
    x_hat.iter().zip(u_upper).map(|(&x, &hi)| x.min(hi)).collect()
}

/// `‖diag(η₂) diag(η₃) A‖₂`; the protocol's equilibria are certified when
/// this is below one.
pub fn gain_condition(eta2: &[f64], eta3: &[f64], graph: &Graph) -> f64 {
    let a = graph.adjacency_matrix();
    let k = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| eta2[i] * eta3[i] * a[(i, j)]);
    spectral_norm(&k, GAIN_NORM_TOL, GAIN_NORM_MAX_ITER)
}

/// Every agent with a positive beacon sends it to each of its neighbours.
pub fn round_messages(graph: &Graph, lambda: &[f64]) -> RoundMessages {
    let mut messages = Vec::new();
    for (sender, &l) in lambda.iter().enumerate() {
        if l > 0.0 {
            messages.extend(graph.neighbors(sender).iter().map(|&receiver| Message {
                sender,
                receiver,
                lambda: l,
            }));
        }
    }
    RoundMessages { messages }
}

/// `‖Δu‖_∞ ≤ ε` and `‖Δλ‖_∞ ≤ ε`.
pub fn is_equilibrium(prev: &ProtocolState, next: &ProtocolState, eps: f64) -> bool {
    let du: Vec<f64> = next.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
    let dl: Vec<f64> = next.lambda.iter().zip(&prev.lambda).map(|(a, b)| a - b).collect();
    inf_norm(&du) <= eps && inf_norm(&dl) <= eps
}

/// Output of one protocol round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub state: ProtocolState,
    /// Violation computed from the output read at the start of the round.
    pub violation: Vec<f64>,
    pub messages: RoundMessages,
}

/// Static protocol configuration: communication overlay, gains and limits.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub comm: Graph,
    pub gains: ProtocolGains,
    pub u_upper: Vec<f64>,
    pub y_lower: Vec<f64>,
    pub measured: Vec<usize>,
}

impl Protocol {
    pub fn new(
        comm: Graph,
        gains: ProtocolGains,
        u_upper: Vec<f64>,
        y_lower: Vec<f64>,
        measured: Vec<usize>,
    ) -> Result<Self> {
        let n = comm.node_count();
        check_len(n, gains.len())?;
        check_len(n, u_upper.len())?;
        check_len(measured.len(), y_lower.len())?;
        if let Some(&bad) = measured.iter().find(|&&m| m >= n) {
            return Err(Error::InvalidScenario(format!("measured node {bad} out of range")));
        }
        Ok(Self {
            comm,
            gains,
            u_upper,
            y_lower,
            measured,
        })
    }

    pub fn gain_condition(&self) -> f64 {
        gain_condition(&self.gains.eta2, &self.gains.eta3, &self.comm)
    }

    /// Advances `state` by one round given the plant output `y` at `state.u`.
    pub fn round(&self, state: &ProtocolState, y: &[f64]) -> Result<RoundOutcome> {
        let n = self.comm.node_count();
        check_len(n, state.u.len())?;
        check_len(self.measured.len(), y.len())?;
        let f = violation(y, &self.y_lower, &self.measured, n);
        let heard = neighbor_beacon_sum(&self.comm, &state.lambda);
        let x_hat = target_setpoint(&state.u, &f, &heard, &self.gains);
        let lambda = beacon_update(&x_hat, &self.u_upper, &self.gains.eta3);
        let u = project(&x_hat, &self.u_upper);
        let messages = round_messages(&self.comm, &lambda);
        Ok(RoundOutcome {
            state: ProtocolState {
                u,
                lambda,
                round: state.round + 1,
            },
            violation: f,
            messages,
        })
    }
}
