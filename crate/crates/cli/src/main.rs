//! `ripple`: run and diagnose ripple-control scenarios.
//!
//! Exit status: 0 on success or convergence, 1 when a run stalls or exhausts
//! its budget or a check fails, 2 on invalid input, 3 on a plant solver
//! failure.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ripple_core::plant::{default_probe_step, max_effort_feasibility, monotonicity_probe, PlantModel};
use ripple_core::scenario_file::load_scenario;
use ripple_core::sim::{
    resolve_gains, run_batch_prepared, run_prepared, Outcome, PreparedScenario, RunResult, Scenario, ScenarioPlant,
};
use ripple_core::{gain_condition, Error};

#[derive(Parser)]
#[command(name = "ripple", version, about = "Saturation-driven distributed control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or every *.json scenario in a directory.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value = "ripple-out")]
        output_dir: PathBuf,
        /// Override the round budget.
        #[arg(long)]
        budget: Option<usize>,
        /// Keep every k-th trace record.
        #[arg(long)]
        decimate: Option<usize>,
        /// Run even if the gain condition is not certified.
        #[arg(long)]
        override_gain_check: bool,
    },
    /// Print the resolved gains and the spectral gain condition.
    CheckGains { path: PathBuf },
    /// Finite-difference monotonicity probe at u(0) and random points in the box.
    CheckMonotonicity {
        path: PathBuf,
        #[arg(long, default_value_t = 5)]
        probe_points: usize,
    },
    /// Scale the load reactive injections of a power scenario and record
    /// solvability and the positive-definiteness margin.
    Sweep {
        path: PathBuf,
        #[arg(long)]
        scale_min: f64,
        #[arg(long)]
        scale_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value = "ripple-out")]
        output_dir: PathBuf,
    },
    /// Whether all controls at their upper limits meet the output limits.
    Feasibility { path: PathBuf },
}

/// A command failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidModel(_) | Error::InvalidScenario(_) | Error::DimensionMismatch { .. } => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::invalid(format!("{e:#}"))
    }
}

type CmdResult = Result<u8, Failure>;

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn outcome_code(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Converged { .. } => 0,
        Outcome::Stalled { .. } | Outcome::BudgetExceeded { .. } => 1,
        Outcome::SolverFailure { .. } => 3,
    }
}

struct Overrides {
    budget: Option<usize>,
    decimate: Option<usize>,
    force: bool,
}

impl Overrides {
    fn apply(&self, scenario: &mut Scenario) -> Result<(), Failure> {
        if let Some(b) = self.budget {
            scenario.config.budget = b;
        }
        if let Some(d) = self.decimate {
            if d == 0 {
                return Err(Failure::invalid("--decimate must be at least 1"));
            }
            scenario.config.decimation = d;
        }
        scenario.config.override_gain_check |= self.force;
        Ok(())
    }
}

fn write_run(dir: &Path, scenario: &Scenario, prepared: &PreparedScenario, result: &RunResult) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::invalid(format!("cannot create {}: {e}", dir.display())))?;
    output::write_trace(dir, scenario, prepared, result)?;
    output::write_plotdata(dir, scenario, prepared, result)?;
    output::write_summary(dir, scenario, prepared, result)?;
    let detail = match &result.outcome {
        Outcome::Converged { rounds } => format!("converged after {rounds} rounds"),
        Outcome::Stalled { rounds, max_violation } => {
            format!("stalled after {rounds} rounds, violation {max_violation:.3e} persists")
        }
        Outcome::BudgetExceeded { rounds } => format!("budget of {rounds} rounds exhausted"),
        Outcome::SolverFailure { round, detail } => format!("plant solve failed in round {round}: {detail}"),
    };
    println!(
        "{}: {detail}; {} messages; gain condition {:.6}; output in {}",
        scenario.name,
        result.total_messages,
        prepared.gain_norm,
        dir.display()
    );
    Ok(outcome_code(&result.outcome))
}

fn cmd_simulate(path: &Path, out: &Path, overrides: &Overrides) -> CmdResult {
    if !path.is_dir() {
        let mut scenario = load(path)?;
        overrides.apply(&mut scenario)?;
        let prepared = scenario.prepare()?;
        let result = run_prepared(&prepared);
        return write_run(out, &scenario, &prepared, &result);
    }

    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut worst = 0;
    let mut ready = Vec::new();
    for file in &files {
        let prepared = load(file).and_then(|mut sc| {
            overrides.apply(&mut sc)?;
            let p = sc.prepare()?;
            Ok((sc, p))
        });
        match prepared {
            Ok(pair) => ready.push(pair),
            Err(f) => {
                eprintln!("{}: {}", file.display(), f.message);
                worst = worst.max(f.code);
            }
        }
    }
    let prepared: Vec<PreparedScenario> = ready.iter().map(|(_, p)| p.clone()).collect();
    let results = run_batch_prepared(&prepared);
    for ((scenario, prepared), result) in ready.iter().zip(&results) {
        let code = write_run(&out.join(&scenario.name), scenario, prepared, result)?;
        worst = worst.max(code);
    }
    Ok(worst)
}

fn cmd_check_gains(path: &Path) -> CmdResult {
    let scenario = load(path)?;
    let plant = scenario.disrupted_plant()?;
    let u0 = scenario.initial_control(&plant);
    let gains = resolve_gains(&scenario.gains, &plant, &scenario.comm, &u0)?;
    println!("{:<12} {:>14} {:>14} {:>14}", "node", "eta1", "eta2", "eta3");
    for (i, label) in scenario.labels.iter().enumerate() {
        println!(
            "{label:<12} {:>14.6e} {:>14.6e} {:>14.6e}",
            gains.eta1[i], gains.eta2[i], gains.eta3[i]
        );
    }
    let norm = gain_condition(&gains.eta2, &gains.eta3, &scenario.comm);
    let pass = norm < 1.0 - ripple_core::ripple::GAIN_NORM_TOL;
    println!("gain condition ‖diag(η₂)diag(η₃)A‖₂ = {norm:.9} ({})", if pass { "pass" } else { "fail" });
    let connected = scenario.comm.is_connected();
    if !connected {
        println!("communication graph is not connected (fail)");
    }
    Ok(if pass && connected { 0 } else { 1 })
}

fn cmd_check_monotonicity(path: &Path, probe_points: usize) -> CmdResult {
    let scenario = load(path)?;
    let plant = scenario.disrupted_plant()?;
    let mut points = vec![scenario.initial_control(&plant)];
    let mut rng = StdRng::seed_from_u64(scenario.config.seed);
    while points.len() < probe_points.max(1) {
        points.push(
            plant
                .u_lower()
                .iter()
                .zip(plant.u_upper())
                .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
                .collect(),
        );
    }
    let mut all_pass = true;
    for (k, u) in points.iter().enumerate() {
        let verdict = monotonicity_probe(&plant, u, default_probe_step(u));
        let margin = match &plant {
            ScenarioPlant::Power(grid) => Some(grid.solve_point(u).map(|sol| grid.prop1_condition(&sol))),
            _ => None,
        };
        let margin_text = match margin {
            Some(Ok(l)) => format!("; lambda_min = {l:.6}"),
            Some(Err(e)) => format!("; lambda_min unavailable: {e}"),
            None => String::new(),
        };
        match verdict {
            Ok(probe) => {
                let worst = probe.jacobian.iter().copied().fold(f64::INFINITY, f64::min);
                println!(
                    "point {k}: {} (smallest sensitivity {worst:.3e}){margin_text}",
                    if probe.monotone { "monotone" } else { "NOT monotone" }
                );
                all_pass &= probe.monotone;
            }
            Err(e) => {
                println!("point {k}: solver failure: {e}{margin_text}");
                all_pass = false;
            }
        }
    }
    println!("{}", if all_pass { "pass" } else { "fail" });
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_sweep(path: &Path, scale_min: f64, scale_max: f64, steps: usize, out: &Path) -> CmdResult {
    let scenario = load(path)?;
    let plant = scenario.disrupted_plant()?;
    let ScenarioPlant::Power(grid) = &plant else {
        return Err(Failure::invalid("sweep needs a power scenario"));
    };
    if steps == 0 {
        return Err(Failure::invalid("--steps must be at least 1"));
    }
    let (q_l, v_g) = grid.split_control(&scenario.initial_control(&plant))?;
    let scales: Vec<f64> = (0..steps)
        .map(|k| {
            if steps == 1 {
                scale_min
            } else {
                scale_min + (scale_max - scale_min) * k as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let rows = grid.loadability_sweep(&q_l, &v_g, &scales);
    fs::create_dir_all(out).map_err(|e| Failure::invalid(format!("cannot create {}: {e}", out.display())))?;
    let file = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&file).map_err(|e| Failure::invalid(format!("{}: {e}", file.display())))?;
    let io = |e: csv::Error| Failure::invalid(format!("{}: {e}", file.display()));
    w.write_record(["scale", "solved", "lambda_min"]).map_err(io)?;
    for r in &rows {
        let lam = r.lambda_min.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([r.scale.to_string(), r.solved.to_string(), lam]).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::invalid(format!("{}: {e}", file.display())))?;
    let last_solved = rows.iter().filter(|r| r.solved).map(|r| r.scale).fold(f64::NAN, f64::max);
    println!("{} scales written to {}; largest solved scale {last_solved}", rows.len(), file.display());
    Ok(0)
}

fn cmd_feasibility(path: &Path) -> CmdResult {
    let scenario = load(path)?;
    let plant = scenario.disrupted_plant()?;
    let feasible = max_effort_feasibility(&plant, scenario.config.eps_feas)?;
    let y = plant.solve(plant.u_upper())?;
    for ((&n, y), lo) in plant.measured().iter().zip(&y).zip(plant.y_lower()) {
        println!("{:<12} y = {y:>14.6} limit {lo:>10.4}", scenario.labels[n]);
    }
    println!("maximum effort {}", if feasible { "feasible" } else { "infeasible" });
    Ok(if feasible { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            path,
            output_dir,
            budget,
            decimate,
            override_gain_check,
        } => cmd_simulate(
            path,
            output_dir,
            &Overrides {
                budget: *budget,
                decimate: *decimate,
                force: *override_gain_check,
            },
        ),
        Command::CheckGains { path } => cmd_check_gains(path),
        Command::CheckMonotonicity { path, probe_points } => cmd_check_monotonicity(path, *probe_points),
        Command::Sweep {
            path,
            scale_min,
            scale_max,
            steps,
            output_dir,
        } => cmd_sweep(path, *scale_min, *scale_max, *steps, output_dir),
        Command::Feasibility { path } => cmd_feasibility(path),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
