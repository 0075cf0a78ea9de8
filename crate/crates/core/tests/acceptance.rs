//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ripple_core::plant::{feasibility_check, max_effort_feasibility, PlantModel};
use ripple_core::power::{BusKind, GridModel};
use ripple_core::scenario_file::load_scenario;
use ripple_core::sim::{
    activation_order_violations, check_trace_invariants, run, run_batch, Outcome, RunResult, Scenario,
    ScenarioPlant, TraceRecord,
};
use ripple_core::synthetic::{random_grid, random_linear_scenario, random_water_network};
use ripple_core::water::{
    edge_pressure_drop, lemma1_monotonicity_test, EdgeLaw, NodeControl, PipeLaw, WaterEdge, WaterModel, WaterNode,
};
use ripple_core::{gain_condition, is_equilibrium, Graph, ProtocolState};

type Check = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Traces collected across criteria for the message-accounting check.
struct Corpus {
    traces: Vec<(String, Graph, Vec<TraceRecord>)>,
}

fn linear_corpus() -> Vec<Scenario> {
    (0..200u64)
        .map(|seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.random_range(2..=10);
            let mut sc = random_linear_scenario(n, &mut rng);
            sc.name = format!("linear-{seed}");
            sc
        })
        .collect()
}

fn ended_at_equilibrium(res: &RunResult, eps: f64) -> bool {
    let t = &res.trace;
    if t.len() < 2 {
        return false;
    }
    let state = |r: &TraceRecord| ProtocolState {
        u: r.u.clone(),
        lambda: r.lambda.clone(),
        round: r.round,
    };
    is_equilibrium(&state(&t[t.len() - 2]), &state(&t[t.len() - 1]), eps)
}

fn c1(corpus: &mut Corpus) -> Check {
    let scenarios = linear_corpus();
    let results = run_batch(&scenarios);
    let mut rounds = 0;
    for (sc, res) in scenarios.iter().zip(results) {
        let res = res.map_err(|e| format!("{}: {e}", sc.name))?;
        let upper = sc.plant.u_upper();
        check_trace_invariants(&res.trace, &sc.comm, upper).map_err(|e| format!("{}: {e}", sc.name))?;
        ensure(res.trace.windows(2).all(|w| w[0].u.iter().zip(&w[1].u).all(|(a, b)| b >= a)), || {
            format!("{}: control decreased", sc.name)
        })?;
        ensure(res.trace.iter().skip(1).all(|r| r.u.iter().zip(upper).all(|(u, h)| u <= h)), || {
            format!("{}: control above its upper limit", sc.name)
        })?;
        ensure(!matches!(res.outcome, Outcome::BudgetExceeded { .. } | Outcome::SolverFailure { .. }), || {
            format!("{}: {:?}", sc.name, res.outcome)
        })?;
        ensure(ended_at_equilibrium(&res, sc.config.eps_eq), || {
            format!("{}: last two records are not an equilibrium", sc.name)
        })?;
        rounds = rounds.max(res.trace.last().unwrap().round);
        corpus.traces.push((sc.name.clone(), sc.comm.clone(), res.trace));
    }
    Ok(format!("200 runs, longest {rounds} rounds"))
}

fn c2(corpus: &mut Corpus) -> Check {
    let scenarios = linear_corpus();
    let mut feasible_runs = 0;
    let mut stalled_runs = 0;
    for sc in &scenarios {
        let prepared = sc.prepare().map_err(|e| format!("{}: {e}", sc.name))?;
        let certified = max_effort_feasibility(&prepared.plant, sc.config.eps_feas).map_err(|e| e.to_string())?
            && gain_condition(&prepared.protocol.gains.eta2, &prepared.protocol.gains.eta3, &sc.comm) < 1.0;
        if certified {
            feasible_runs += 1;
            let res = run(sc).map_err(|e| e.to_string())?;
            let lam = res.final_state.lambda.iter().fold(0.0f64, |a, &b| a.max(b));
            ensure(lam <= 1e-6, || format!("{}: terminal beacon {lam:e}", sc.name))?;
            ensure(
                feasibility_check(&prepared.plant, &res.final_state.u, sc.config.eps_feas).unwrap_or(false),
                || format!("{}: terminal state infeasible", sc.name),
            )?;
            ensure(matches!(res.outcome, Outcome::Converged { .. }), || {
                format!("{}: {:?}", sc.name, res.outcome)
            })?;
        }

        // Tighten ū below every output's requirement.
        let ScenarioPlant::Linear(p) = &sc.plant else { unreachable!() };
        let tight_upper: Vec<f64> = p.u_upper().iter().map(|h| 0.25 * h).collect();
        let mut tight = sc.clone();
        tight.name = format!("{}-tight", sc.name);
        tight.plant = ScenarioPlant::Linear(p.clone().with_upper(tight_upper.clone()).unwrap());
        ensure(!max_effort_feasibility(&tight.plant, sc.config.eps_feas).unwrap(), || {
            format!("{}: tightened plant still feasible", tight.name)
        })?;
        let res = run(&tight).map_err(|e| e.to_string())?;
        ensure(matches!(res.outcome, Outcome::Stalled { .. }), || {
            format!("{}: {:?}", tight.name, res.outcome)
        })?;
        ensure(res.final_state.u == tight_upper, || format!("{}: not saturated", tight.name))?;
        stalled_runs += 1;
        corpus.traces.push((tight.name.clone(), tight.comm.clone(), res.trace));
    }
    ensure(feasible_runs > 0, || "no certified instance".into())?;
    Ok(format!("{feasible_runs} converged with terminal λ ≤ 1e-6, {stalled_runs} tightened runs stalled at ū"))
}

/// Central differences of the load voltages, independent of the analytic
/// Jacobian code.
fn fd_jacobian(grid: &GridModel, u: &[f64], h: f64) -> Result<DMatrix<f64>, String> {
    let m = grid.loads().len();
    let n = u.len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[k] += h;
        dn[k] -= h;
        let a = grid.solve(&up).map_err(|e| e.to_string())?;
        let b = grid.solve(&dn).map_err(|e| e.to_string())?;
        for r in 0..m {
            j[(r, k)] = (a[r] - b[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

fn interior_point(grid: &GridModel, rng: &mut StdRng) -> Vec<f64> {
    grid.u_lower()
        .iter()
        .zip(grid.u_upper())
        .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect()
}

fn two_bus(q: f64) -> GridModel {
    GridModel::new(
        Graph::new(2, &[(0, 1)]).unwrap(),
        vec![10.0],
        vec![
            BusKind::Generator { v_set: 1.0, v_min: 1.0, v_max: 1.02 },
            BusKind::Load { q, q_flex: 0.0, v_min: 0.94 },
        ],
    )
    .unwrap()
}

fn c3() -> Check {
    // Larger root of 10 v² − 10 v + 0.1 = 0.
    let oracle = (1.0 + (1.0f64 - 4.0 * 0.1 / 10.0).sqrt()) / 2.0;
    let v = two_bus(-0.1).solve(&[1.0, -0.1]).map_err(|e| e.to_string())?[0];
    ensure((v - oracle).abs() <= 1e-8, || format!("2-bus v_L = {v}, oracle {oracle}"))?;

    let mut rng = StdRng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut points = 0;
    while points < 20 {
        let grid = random_grid(rng.random_range(4..=5), &mut rng);
        let u = interior_point(&grid, &mut rng);
        let Ok(sol) = grid.solve_point(&u) else { continue };
        let analytic = grid.analytic_jacobian(&sol).map_err(|e| e.to_string())?;
        let fd = fd_jacobian(&grid, &u, 1e-6)?;
        let scale = analytic.amax().max(1e-12);
        let rel = (&analytic - &fd).amax() / scale;
        worst = worst.max(rel);
        ensure(rel <= 1e-5, || format!("point {points}: relative error {rel:e}"))?;
        points += 1;
    }
    Ok(format!("|v_L − oracle| = {:.1e}; worst Jacobian relative error {worst:.1e}", (v - oracle).abs()))
}

fn c4() -> Check {
    let mut rng = StdRng::seed_from_u64(4);
    let mut certified = 0;
    for _ in 0..200 {
        let grid = random_grid(rng.random_range(3..=6), &mut rng);
        let u = interior_point(&grid, &mut rng);
        let Ok(sol) = grid.solve_point(&u) else { continue };
        if grid.prop1_condition(&sol) > 0.0 {
            certified += 1;
            let jq = grid.jacobian_vl_ql(&sol).map_err(|e| e.to_string())?;
            let jv = grid.jacobian_vl_vg(&sol).map_err(|e| e.to_string())?;
            let min = jq.min().min(jv.min());
            ensure(min >= -1e-10, || format!("Jacobian entry {min:e} with positive margin"))?;
        }
    }
    ensure(certified > 0, || "no certified grid point".into())?;

    let grid = two_bus(-0.1);
    let q = DVector::from_element(1, -0.1);
    let vg = DVector::from_element(1, 1.0);
    // Real roots exist while 1 − 4 · 0.1 s / 10 ≥ 0.
    let boundary = 25.0;
    let scales: Vec<f64> = (0..=290).map(|k| 1.0 + 0.1 * f64::from(k)).collect();
    let rows = grid.loadability_sweep(&q, &vg, &scales);
    for r in &rows {
        ensure(r.solved == (r.scale <= boundary), || format!("scale {}: solved = {}", r.scale, r.solved))?;
    }
    let lams: Vec<f64> = rows.iter().filter_map(|r| r.lambda_min).collect();
    ensure(lams.windows(2).all(|w| w[1] <= w[0]), || "λ_min increased along the sweep".into())?;
    let edge = grid.loadability_sweep(&q, &vg, &[boundary - 1e-6, boundary + 1e-6]);
    ensure(edge[0].solved && !edge[1].solved, || {
        format!("boundary not resolved to 1e-6: {edge:?}")
    })?;
    Ok(format!("{certified} certified points nonnegative; sweep fails past scale {boundary} ± 1e-6"))
}

fn pipe(c: f64) -> EdgeLaw {
    EdgeLaw::Pipe(PipeLaw::darcy_weisbach(c).unwrap())
}

fn c5() -> Check {
    let single = WaterModel::new(
        vec![WaterNode::fixed(5.0, 5.0, 5.0), WaterNode::injection(-100.0, -100.0, 0.0, Some(0.0))],
        vec![WaterEdge { from: 0, to: 1, law: pipe(0.001) }],
    )
    .unwrap();
    let p = single.solve_network(&[5.0, -100.0]).map_err(|e| e.to_string())?.pressures[1];
    ensure((p - (-5.0)).abs() <= 1e-6, || format!("single pipe pressure {p}"))?;

    let parallel = WaterModel::new(
        vec![
            WaterNode::fixed(50.0, 50.0, 50.0),
            WaterNode::injection(0.0, 0.0, 0.0, None),
            WaterNode::injection(0.0, 0.0, 0.0, None),
            WaterNode::injection(-200.0, -200.0, -200.0, Some(0.0)),
        ],
        vec![
            WaterEdge { from: 0, to: 1, law: pipe(0.001) },
            WaterEdge { from: 1, to: 3, law: pipe(0.001) },
            WaterEdge { from: 0, to: 2, law: pipe(0.001) },
            WaterEdge { from: 2, to: 3, law: pipe(0.001) },
        ],
    )
    .unwrap();
    let sol = parallel.solve_network(&[50.0, 0.0, 0.0, -200.0]).map_err(|e| e.to_string())?;
    ensure(sol.flows.iter().all(|s| (s - 100.0).abs() <= 1e-6), || format!("flows {:?}", sol.flows))?;

    let mut rng = StdRng::seed_from_u64(5);
    for pair in 0..100 {
        let net = random_water_network(6, &mut rng);
        let low: Vec<f64> = net
            .nodes()
            .iter()
            .map(|n| match n.control {
                NodeControl::FixedPressure => rng.random_range(n.lower..n.upper),
                NodeControl::Injection => rng.random_range(n.lower..=n.upper),
            })
            .collect();
        let high: Vec<f64> = low
            .iter()
            .map(|&x| if rng.random_bool(0.5) { x + rng.random_range(0.0..10.0) } else { x })
            .collect();
        // Both solutions must satisfy conservation and every edge law.
        for u in [&low, &high] {
            let s = net.solve_network(u).map_err(|e| e.to_string())?;
            for (i, n) in net.nodes().iter().enumerate() {
                if n.control == NodeControl::Injection {
                    ensure((s.injections[i] - u[i]).abs() <= 1e-6, || format!("pair {pair}: imbalance at {i}"))?;
                }
            }
            for (e, &f) in net.edges().iter().zip(&s.flows) {
                let gap = s.pressures[e.from] - s.pressures[e.to] - edge_pressure_drop(f, &e.law);
                ensure(gap.abs() <= 1e-6, || format!("pair {pair}: edge law off by {gap:e}"))?;
            }
        }
        ensure(lemma1_monotonicity_test(&net, &high, &low).map_err(|e| e.to_string())?, || {
            format!("pair {pair}: pressures not ordered")
        })?;
    }
    Ok(format!("single pipe {p:.9} m; split {:.9}/{:.9}; 100 ordered pairs", sol.flows[0], sol.flows[2]))
}

fn violating_labels(sc: &Scenario) -> Result<Vec<String>, String> {
    let plant = sc.disrupted_plant().map_err(|e| e.to_string())?;
    let u0 = sc.initial_control(&plant);
    let y = plant.solve(&u0).map_err(|e| e.to_string())?;
    Ok(plant
        .measured()
        .iter()
        .zip(y.iter().zip(plant.y_lower()))
        .filter(|(_, (y, lo))| y < lo)
        .map(|(&n, _)| sc.labels[n].clone())
        .collect())
}

fn terminal_outputs_ok(sc: &Scenario, res: &RunResult) -> Result<(), String> {
    let plant = sc.disrupted_plant().map_err(|e| e.to_string())?;
    let y = plant.solve(&res.final_state.u).map_err(|e| e.to_string())?;
    for ((&n, &yv), &lo) in plant.measured().iter().zip(&y).zip(plant.y_lower()) {
        ensure(yv >= lo - 1e-6, || format!("{}: node {} at {yv} below {lo}", sc.name, sc.labels[n]))?;
    }
    Ok(())
}

fn c6(corpus: &mut Corpus) -> Check {
    let sc = load_scenario(&scenario_path("pjm5.json")).map_err(|e| e.to_string())?;
    let before = violating_labels(&sc)?;
    ensure(!before.is_empty(), || "disruption leaves no violation".into())?;
    let res = run(&sc).map_err(|e| e.to_string())?;
    ensure(matches!(res.outcome, Outcome::Converged { .. }), || format!("{:?}", res.outcome))?;
    terminal_outputs_ok(&sc, &res)?;
    let bad = activation_order_violations(&res.trace, &sc.comm);
    ensure(bad.is_empty(), || format!("agents moving before assistance: {bad:?}"))?;
    let rounds = res.trace.last().unwrap().round;
    corpus.traces.push((sc.name.clone(), sc.comm.clone(), res.trace));
    Ok(format!("buses {before:?} violated; converged in {rounds} rounds, {} messages", res.total_messages))
}

fn c7(corpus: &mut Corpus) -> Check {
    let sc = load_scenario(&scenario_path("wds10.json")).map_err(|e| e.to_string())?;
    let before = violating_labels(&sc)?;
    for label in ["3", "5", "6", "7", "8", "9"] {
        ensure(before.iter().any(|l| l == label), || format!("node {label} not violated after disruption"))?;
    }
    let res = run(&sc).map_err(|e| e.to_string())?;
    ensure(matches!(res.outcome, Outcome::Converged { .. }), || format!("{:?}", res.outcome))?;
    terminal_outputs_ok(&sc, &res)?;
    // Pressures are solved to 1e-10; allow that much jitter between rounds.
    let drop = res
        .trace
        .windows(2)
        .flat_map(|w| w[0].y.iter().zip(&w[1].y).map(|(a, b)| a - b).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    ensure(drop <= 1e-9, || format!("a load pressure fell by {drop:e}"))?;
    let rounds = res.trace.last().unwrap().round;
    corpus.traces.push((sc.name.clone(), sc.comm.clone(), res.trace));
    Ok(format!("nodes {before:?} violated; converged in {rounds} rounds, {} messages", res.total_messages))
}

fn c8(corpus: &Corpus) -> Check {
    let mut records = 0;
    for (name, comm, trace) in &corpus.traces {
        for rec in trace {
            let expected: usize = (0..comm.node_count())
                .filter(|&i| rec.lambda[i] > 0.0)
                .map(|i| comm.degree(i))
                .sum();
            ensure(rec.messages == expected, || {
                format!("{name} round {}: {} messages, expected {expected}", rec.round, rec.messages)
            })?;
            if rec.lambda.iter().all(|&l| l == 0.0) {
                ensure(rec.messages == 0, || format!("{name} round {}: messages without beacons", rec.round))?;
            }
            records += 1;
        }
    }
    Ok(format!("{} traces, {records} records", corpus.traces.len()))
}

fn c9() -> Check {
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        let p = rng.random_range(0.1..0.9);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|_| rng.random_bool(p))
            .collect();
        let g = Graph::new(n, &edges).unwrap();
        let eta2: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let eta3: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let a = g.adjacency_matrix();
        let k = DMatrix::from_fn(n, n, |i, j| eta2[i] * eta3[i] * a[(i, j)]);
        let oracle = k.singular_values().max();
        let value = gain_condition(&eta2, &eta3, &g);
        let err = (value - oracle).abs();
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("n = {n}: {value} vs SVD {oracle}"))?;
    }
    Ok(format!("50 graphs, worst deviation {worst:.1e}"))
}

fn main() {
    let mut corpus = Corpus { traces: Vec::new() };
    let mut failed = 0;
    let mut report = |id: &str, title: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let mut result = f();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if elapsed > limit {
                result = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS {id} {title} ({elapsed:.2?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {title} ({elapsed:.2?}): {detail}");
            }
        }
    };
    let secs = |s| Some(Duration::from_secs(s));
    report("C1", "nondecreasing bounded runs reach equilibrium", secs(30), &mut || c1(&mut corpus));
    report("C2", "equilibria feasible with silent beacons; infeasible runs stall", None, &mut || c2(&mut corpus));
    report("C3", "power flow matches closed form and finite differences", secs(5), &mut c3);
    report("C4", "positive margin implies nonnegative Jacobians; loadability boundary", None, &mut c4);
    report("C5", "hydraulic hand cases and pressure ordering", secs(10), &mut c5);
    report("C6", "PJM 5-bus recovery and activation ordering", secs(10), &mut || c6(&mut corpus));
    report("C7", "10-node water network recovery", secs(10), &mut || c7(&mut corpus));
    report("C8", "message counts match beacons", None, &mut || c8(&corpus));
    report("C9", "gain condition matches SVD", None, &mut c9);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
