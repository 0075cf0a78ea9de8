//! Seeded random instances for property tests, benchmarks and acceptance
//! runs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::Graph;
use crate::plant::LinearPlant;
use crate::power::{BusKind, GridModel};
use crate::sim::{GainSettings, RunConfig, Scenario, ScenarioPlant};
use crate::water::{EdgeLaw, PipeLaw, WaterEdge, WaterModel, WaterNode};

/// Random spanning tree plus each remaining pair with probability `extra`.
pub fn random_connected_graph<R: Rng>(n: usize, extra: f64, rng: &mut R) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        edges.push((order[k].min(parent), order[k].max(parent)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && rng.random_bool(extra) {
                edges.push((a, b));
            }
        }
    }
    Graph::new(n, &edges).expect("generated edges are simple")
}

/// Monotone affine plant on `n` agents whose outputs start below their
/// limits and become feasible at maximum effort.
pub fn random_monotone_linear<R: Rng>(n: usize, rng: &mut R) -> LinearPlant {
    let mut measured: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
    if measured.is_empty() {
        measured.push(rng.random_range(0..n));
    }
    let m = measured.len();
    let mut s = DMatrix::zeros(m, n);
    for (k, &node) in measured.iter().enumerate() {
        for j in 0..n {
            if j == node {
                s[(k, j)] = rng.random_range(0.5..2.0);
            } else if rng.random_bool(0.4) {
                s[(k, j)] = rng.random_range(0.0..0.5);
            }
        }
    }
    let u_upper: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let offset: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..0.0)).collect();
    let reach = &s * nalgebra::DVector::from_column_slice(&u_upper);
    let y_lower: Vec<f64> = (0..m)
        .map(|k| offset[k] + rng.random_range(0.3..0.9) * reach[k])
        .collect();
    LinearPlant::new(s, offset, measured, vec![0.0; n], u_upper, y_lower).expect("valid by construction")
}

/// Linear scenario on a random connected communication graph with
/// automatic gains.
pub fn random_linear_scenario<R: Rng>(n: usize, rng: &mut R) -> Scenario {
    let plant = random_monotone_linear(n, rng);
    let comm = random_connected_graph(n, 0.3, rng);
    Scenario {
        name: format!("linear-{n}"),
        labels: (0..n).map(|i| format!("a{i}")).collect(),
        plant: ScenarioPlant::Linear(plant),
        comm,
        gains: GainSettings::auto(),
        u0: None,
        disruption: Vec::new(),
        config: RunConfig::default(),
    }
}

/// Connected grid with one or two generators and lightly loaded load buses.
pub fn random_grid<R: Rng>(n: usize, rng: &mut R) -> GridModel {
    let graph = random_connected_graph(n, 0.3, rng);
    let sus: Vec<f64> = graph.edges().iter().map(|_| rng.random_range(5.0..30.0)).collect();
    let gens = if n > 3 && rng.random_bool(0.5) { 2 } else { 1 };
    let buses = (0..n)
        .map(|i| {
            if i < gens {
                BusKind::Generator {
                    v_set: 1.0,
                    v_min: 0.95,
                    v_max: 1.05,
                }
            } else {
                BusKind::Load {
                    q: rng.random_range(-0.4..0.0),
                    q_flex: 0.1,
                    v_min: 0.9,
                }
            }
        })
        .collect();
    GridModel::new(graph, sus, buses).expect("valid by construction")
}

/// Pipe network with node 0 as the only pressure reference and consumers
/// everywhere else.
pub fn random_water_network<R: Rng>(n: usize, rng: &mut R) -> WaterModel {
    let graph = random_connected_graph(n, 0.3, rng);
    let mut nodes = vec![WaterNode::fixed(50.0, 40.0, 60.0)];
    for _ in 1..n {
        let d = rng.random_range(-60.0..-5.0);
        nodes.push(WaterNode::injection(d, d, 0.0, Some(0.0)));
    }
    let edges = graph
        .edges()
        .iter()
        .map(|&(a, b)| WaterEdge {
            from: a,
            to: b,
            law: EdgeLaw::Pipe(PipeLaw::darcy_weisbach(rng.random_range(1e-4..2e-3)).expect("positive")),
        })
        .collect();
    WaterModel::new(nodes, edges).expect("valid by construction")
}
