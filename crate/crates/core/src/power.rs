//! Lossless reactive-power/voltage grid model `q = diag(v) B v`.
//!
//! Buses are split into generators (controlled voltage magnitude) and loads
//! (controlled reactive injection). The controls are `u_n = v_n` on
//! generators and `u_n = q_n` on loads; the outputs are load voltages. All
//! quantities are per-unit.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;
use crate::linalg::{inf_norm, min_symmetric_eigenvalue};
use crate::plant::PlantModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusKind {
    /// Voltage-controlled bus; `v_min ≤ v_set ≤ v_max`.
    Generator { v_set: f64, v_min: f64, v_max: f64 },
    /// Load bus with reactive injection `q` (negative for consumption) that
    /// may be raised by up to `q_flex`, and a lower voltage limit.
    Load { q: f64, q_flex: f64, v_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    pub tol: f64,
    /// Residual accepted if Newton stagnates before reaching `tol`.
    pub accept_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            accept_tol: 1e-8,
            max_iter: 50,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Load voltage magnitudes, in load order.
    pub v_l: DVector<f64>,
    /// Generator voltage magnitudes the solve was run with.
    pub v_g: DVector<f64>,
    /// Load reactive injections the solve was run with.
    pub q_l: DVector<f64>,
    /// Generator reactive injections from the first block row.
    pub q_g: DVector<f64>,
    /// `B_LG v_G + B_LL v_L`.
    pub i_l: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// One row of a loadability sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub scale: f64,
    pub solved: bool,
    /// Smallest eigenvalue of `diag(g_L) + B_LL`, when the flow solved.
    pub lambda_min: Option<f64>,
}

/// Reactive injections `q_n = v_n (B v)_n`.
pub fn reactive_injections(v: &[f64], b: &DMatrix<f64>) -> Vec<f64> {
    let v = DVector::from_column_slice(v);
    let bv = b * &v;
    v.component_mul(&bv).iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    graph: Graph,
    susceptances: Vec<f64>,
    buses: Vec<BusKind>,
    b: DMatrix<f64>,
    gens: Vec<usize>,
    loads: Vec<usize>,
    b_gg: DMatrix<f64>,
    b_lg: DMatrix<f64>,
    b_ll: DMatrix<f64>,
    u_lower: Vec<f64>,
    u_upper: Vec<f64>,
    y_lower: Vec<f64>,
    options: PowerFlowOptions,
}

impl GridModel {
    /// `susceptances` is parallel to `graph.edges()`.
    pub fn new(graph: Graph, susceptances: Vec<f64>, buses: Vec<BusKind>) -> Result<Self> {
        let n = graph.node_count();
        check_len(n, buses.len())?;
        let b = graph.weighted_laplacian(&susceptances)?;
        let gens: Vec<usize> = (0..n)
            .filter(|&i| matches!(buses[i], BusKind::Generator { .. }))
            .collect();
        let loads: Vec<usize> = (0..n)
            .filter(|&i| matches!(buses[i], BusKind::Load { .. }))
            .collect();
        if gens.is_empty() {
            return Err(Error::InvalidModel("grid needs at least one generator bus".into()));
        }
        let reached = graph.reachable_from(&gens);
        if let Some(bus) = loads.iter().find(|&&l| !reached[l]) {
            return Err(Error::InvalidModel(format!(
                "load bus {bus} is not connected to any generator"
            )));
        }

        let mut u_lower = vec![0.0; n];
        let mut u_upper = vec![0.0; n];
        let mut y_lower = Vec::with_capacity(loads.len());
        for (i, bus) in buses.iter().enumerate() {
            match *bus {
                BusKind::Generator { v_set, v_min, v_max } => {
                    if !(v_set > 0.0 && v_min > 0.0 && v_min <= v_set && v_set <= v_max) {
                        return Err(Error::InvalidModel(format!(
                            "generator bus {i}: need 0 < v_min ≤ v_set ≤ v_max, got {v_min}, {v_set}, {v_max}"
                        )));
                    }
                    u_lower[i] = v_min;
                    u_upper[i] = v_max;
                }
                BusKind::Load { q, q_flex, v_min } => {
                    if q_flex.is_nan() || q_flex < 0.0 || !q.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "load bus {i}: flexibility must be nonnegative, got {q_flex}"
                        )));
                    }
                    u_lower[i] = q;
                    u_upper[i] = q + q_flex;
                    y_lower.push(v_min);
                }
            }
        }

        let b_gg = b.select_rows(&gens).select_columns(&gens);
        let b_lg = b.select_rows(&loads).select_columns(&gens);
        let b_ll = b.select_rows(&loads).select_columns(&loads);
        Ok(Self {
            graph,
            susceptances,
            buses,
            b,
            gens,
            loads,
            b_gg,
            b_lg,
            b_ll,
            u_lower,
            u_upper,
            y_lower,
            options: PowerFlowOptions::default(),
        })
    }

    pub fn with_options(mut self, options: PowerFlowOptions) -> Self {
        self.options = options;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn susceptances(&self) -> &[f64] {
        &self.susceptances
    }

    pub fn buses(&self) -> &[BusKind] {
        &self.buses
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn generators(&self) -> &[usize] {
        &self.gens
    }

    pub fn loads(&self) -> &[usize] {
        &self.loads
    }

    pub fn b_gg(&self) -> &DMatrix<f64> {
        &self.b_gg
    }

    pub fn b_lg(&self) -> &DMatrix<f64> {
        &self.b_lg
    }

    pub fn b_ll(&self) -> &DMatrix<f64> {
        &self.b_ll
    }

    /// Operating point from the bus data: `v_set` on generators, `q` on loads.
    pub fn nominal_control(&self) -> Vec<f64> {
        self.buses
            .iter()
            .map(|b| match *b {
                BusKind::Generator { v_set, .. } => v_set,
                BusKind::Load { q, .. } => q,
            })
            .collect()
    }

    /// Splits a bus-indexed control vector into `(q_L, v_G)`.
    pub fn split_control(&self, u: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        check_len(self.buses.len(), u.len())?;
        let q_l = DVector::from_iterator(self.loads.len(), self.loads.iter().map(|&i| u[i]));
        let v_g = DVector::from_iterator(self.gens.len(), self.gens.iter().map(|&i| u[i]));
        Ok((q_l, v_g))
    }

    /// Solves `diag(v_L)(B_LG v_G + B_LL v_L) = q_L` by damped Newton from a
    /// flat 1.0 per-unit start.
    pub fn solve_load_voltages(&self, q_l: &DVector<f64>, v_g: &DVector<f64>) -> Result<PowerFlowSolution> {
        self.solve_load_voltages_from(q_l, v_g, DVector::from_element(self.loads.len(), 1.0))
    }

    pub fn solve_load_voltages_from(
        &self,
        q_l: &DVector<f64>,
        v_g: &DVector<f64>,
        initial: DVector<f64>,
    ) -> Result<PowerFlowSolution> {
        check_len(self.loads.len(), q_l.len())?;
        check_len(self.gens.len(), v_g.len())?;
        check_len(self.loads.len(), initial.len())?;
        if v_g.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::InvalidOperatingPoint(
                "generator voltages must be positive".into(),
            ));
        }
        let opts = self.options;
        let drive = &self.b_lg * v_g;
        let mismatch = |v: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
            let i_l = &drive + &self.b_ll * v;
            let r = v.component_mul(&i_l) - q_l;
            (i_l, r)
        };

        let mut v = initial;
        let (mut i_l, mut r) = mismatch(&v);
        let mut res = r.amax();
        let mut iterations = 0;
        while res > opts.tol {
            if iterations == opts.max_iter {
                break;
            }
            iterations += 1;
            let g = DMatrix::from_diagonal(&i_l) + DMatrix::from_diagonal(&v) * &self.b_ll;
            let step = g.lu().solve(&r).ok_or(Error::SingularJacobian)?;
            if step.iter().any(|s| !s.is_finite()) {
                return Err(Error::SingularJacobian);
            }
            let mut t = 1.0;
            let mut halvings = 0;
            let (next_v, next_i, next_r, next_res) = loop {
                let cand = &v - t * &step;
                let positive = cand.iter().all(|&x| x > 0.0);
                let (ci, cr) = mismatch(&cand);
                let cres = cr.amax();
                if (positive && cres < res) || halvings == opts.max_halvings {
                    break (cand, ci, cr, cres);
                }
                t *= 0.5;
                halvings += 1;
            };
            if !next_v.iter().all(|&x| x > 0.0 && x.is_finite()) {
                break;
            }
            let stalled = next_res >= res;
            v = next_v;
            i_l = next_i;
            r = next_r;
            res = next_res;
            if stalled && res <= opts.accept_tol {
                break;
            }
        }
        if res.is_nan() || res > opts.accept_tol {
            return Err(Error::PowerFlowInfeasible {
                iterations,
                residual: res,
            });
        }
        let q_g = (&self.b_gg * v_g + self.b_lg.transpose() * &v).component_mul(v_g);
        Ok(PowerFlowSolution {
            v_l: v,
            v_g: v_g.clone(),
            q_l: q_l.clone(),
            q_g,
            i_l,
            iterations,
            residual: res,
        })
    }

    /// Power flow at a bus-indexed control vector.
    pub fn solve_point(&self, u: &[f64]) -> Result<PowerFlowSolution> {
        let (q_l, v_g) = self.split_control(u)?;
        self.solve_load_voltages(&q_l, &v_g)
    }

    fn newton_matrix(&self, sol: &PowerFlowSolution) -> DMatrix<f64> {
        DMatrix::from_diagonal(&sol.i_l) + DMatrix::from_diagonal(&sol.v_l) * &self.b_ll
    }

    /// `∇_{q_L} v_L = (diag(i_L) + diag(v_L) B_LL)⁻¹`.
    pub fn jacobian_vl_ql(&self, sol: &PowerFlowSolution) -> Result<DMatrix<f64>> {
        self.newton_matrix(sol)
            .try_inverse()
            .ok_or(Error::SingularJacobian)
    }

    /// `∇_{v_G} v_L = −(diag(i_L) + diag(v_L) B_LL)⁻¹ diag(v_L) B_LG`.
    pub fn jacobian_vl_vg(&self, sol: &PowerFlowSolution) -> Result<DMatrix<f64>> {
        let g_inv = self.jacobian_vl_ql(sol)?;
        Ok(-(g_inv * DMatrix::from_diagonal(&sol.v_l) * &self.b_lg))
    }

    /// Both analytic Jacobians assembled into one `|loads| × N` matrix with
    /// columns in bus order, matching [`PlantModel::solve`].
    pub fn analytic_jacobian(&self, sol: &PowerFlowSolution) -> Result<DMatrix<f64>> {
        let jq = self.jacobian_vl_ql(sol)?;
        let jv = self.jacobian_vl_vg(sol)?;
        let mut out = DMatrix::zeros(self.loads.len(), self.buses.len());
        for (j, &bus) in self.loads.iter().enumerate() {
            out.set_column(bus, &jq.column(j));
        }
        for (j, &bus) in self.gens.iter().enumerate() {
            out.set_column(bus, &jv.column(j));
        }
        Ok(out)
    }

    /// Smallest eigenvalue of `diag(g_L) + B_LL` with `g_L = q_L / v_L²`.
    /// A positive value certifies a nonnegative input-output Jacobian at
    /// this operating point.
    pub fn prop1_condition(&self, sol: &PowerFlowSolution) -> f64 {
        let g_l = sol.q_l.zip_map(&sol.v_l, |q, v| q / (v * v));
        min_symmetric_eigenvalue(&(DMatrix::from_diagonal(&g_l) + &self.b_ll))
    }

    /// Scales `q_l_nominal` by each entry of `scales` and records whether the
    /// flow solves and, if so, the positive-definiteness margin.
    pub fn loadability_sweep(
        &self,
        q_l_nominal: &DVector<f64>,
        v_g: &DVector<f64>,
        scales: &[f64],
    ) -> Vec<SweepRow> {
        scales
            .iter()
            .map(|&scale| match self.solve_load_voltages(&(q_l_nominal * scale), v_g) {
                Ok(sol) => SweepRow {
                    scale,
                    solved: true,
                    lambda_min: Some(self.prop1_condition(&sol)),
                },
                Err(_) => SweepRow {
                    scale,
                    solved: false,
                    lambda_min: None,
                },
            })
            .collect()
    }

    fn rebuild(&self, graph: Graph, susceptances: Vec<f64>, buses: Vec<BusKind>) -> Result<Self> {
        Ok(GridModel::new(graph, susceptances, buses)?.with_options(self.options))
    }

    /// Copy with line `{a, b}` tripped.
    pub fn without_line(&self, a: usize, b: usize) -> Result<Self> {
        let idx = self
            .graph
            .edge_index(a, b)
            .ok_or_else(|| Error::InvalidScenario(format!("no line between buses {a} and {b}")))?;
        let mut sus = self.susceptances.clone();
        sus.remove(idx);
        self.rebuild(self.graph.without_edge(idx), sus, self.buses.clone())
    }

    pub fn with_line_susceptance(&self, a: usize, b: usize, value: f64) -> Result<Self> {
        let idx = self
            .graph
            .edge_index(a, b)
            .ok_or_else(|| Error::InvalidScenario(format!("no line between buses {a} and {b}")))?;
        let mut sus = self.susceptances.clone();
        sus[idx] = value;
        self.rebuild(self.graph.clone(), sus, self.buses.clone())
    }

    /// Copy with the reactive injection at `bus` replaced by `f(q)`.
    pub fn with_load(&self, bus: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut buses = self.buses.clone();
        match buses.get_mut(bus) {
            Some(BusKind::Load { q, .. }) => *q = f(*q),
            Some(BusKind::Generator { .. }) => {
                return Err(Error::InvalidScenario(format!("bus {bus} is not a load bus")))
            }
            None => return Err(Error::InvalidScenario(format!("bus {bus} does not exist"))),
        }
        self.rebuild(self.graph.clone(), self.susceptances.clone(), buses)
    }

    /// Copy with the generator at `bus` out of service: the bus becomes a
    /// zero-injection load with no flexibility and no voltage requirement.
    pub fn without_generator(&self, bus: usize) -> Result<Self> {
        let mut buses = self.buses.clone();
        match buses.get(bus) {
            Some(BusKind::Generator { .. }) => {
                buses[bus] = BusKind::Load {
                    q: 0.0,
                    q_flex: 0.0,
                    v_min: 0.0,
                }
            }
            Some(BusKind::Load { .. }) => {
                return Err(Error::InvalidScenario(format!("bus {bus} is not a generator")))
            }
            None => return Err(Error::InvalidScenario(format!("bus {bus} does not exist"))),
        }
        self.rebuild(self.graph.clone(), self.susceptances.clone(), buses)
    }
}

impl PlantModel for GridModel {
    fn control_dim(&self) -> usize {
        self.buses.len()
    }

    fn measured(&self) -> &[usize] {
        &self.loads
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
        Ok(self.solve_point(u)?.v_l.iter().copied().collect())
    }
}

/// Residual `‖diag(v_L)(B_LG v_G + B_LL v_L) − q_L‖_∞` of a solution.
pub fn flow_residual(grid: &GridModel, sol: &PowerFlowSolution) -> f64 {
    let i_l = grid.b_lg() * &sol.v_g + grid.b_ll() * &sol.v_l;
    let r = sol.v_l.component_mul(&i_l) - &sol.q_l;
    inf_norm(r.as_slice())
}
