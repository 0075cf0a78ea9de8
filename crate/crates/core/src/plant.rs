//! The plant contract: a deterministic map from a control vector `u` to the
//! outputs observed at a subset of nodes, together with box limits on `u`
//! and lower limits on the outputs.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Default tolerance for feasibility checks, in plant output units.
pub const DEFAULT_FEAS_TOL: f64 = 1e-6;
/// Entries of a finite-difference Jacobian below `-MONOTONICITY_TOL` fail the probe.
pub const MONOTONICITY_TOL: f64 = 1e-7;

/// A physical plant `y = F(u)`.
///
/// Implementations must not keep mutable state across [`PlantModel::solve`]
/// calls; solves may run concurrently.
pub trait PlantModel: Send + Sync {
    /// Number of controllable agents `N`.
    fn control_dim(&self) -> usize;

    /// Node indices whose outputs are observed, in the order of `solve`'s output.
    fn measured(&self) -> &[usize];

    fn u_lower(&self) -> &[f64];

    fn u_upper(&self) -> &[f64];

    /// Lower output limits, parallel to [`PlantModel::measured`].
    fn y_lower(&self) -> &[f64];

    fn solve(&self, u: &[f64]) -> Result<Vec<f64>>;
}

/// True iff `u` lies in the control box and `F(u)` meets the output limits,
/// both up to `tol`.
pub fn feasibility_check(plant: &dyn PlantModel, u: &[f64], tol: f64) -> Result<bool> {
    check_len(plant.control_dim(), u.len())?;
    let in_box = u
        .iter()
        .zip(plant.u_lower().iter().zip(plant.u_upper()))
        .all(|(&x, (&lo, &hi))| x >= lo - tol && x <= hi + tol);
    let y = plant.solve(u).map_err(|e| Error::solver_failure(u, e))?;
    Ok(in_box && outputs_meet_limits(&y, plant.y_lower(), tol))
}

/// Whether applying every control at its upper limit satisfies the output
/// limits. For a monotone plant this decides whether the feasible set is
/// nonempty.
pub fn max_effort_feasibility(plant: &dyn PlantModel, tol: f64) -> Result<bool> {
    let u = plant.u_upper().to_vec();
    let y = plant.solve(&u).map_err(|e| Error::solver_failure(&u, e))?;
    Ok(outputs_meet_limits(&y, plant.y_lower(), tol))
}

fn outputs_meet_limits(y: &[f64], y_lower: &[f64], tol: f64) -> bool {
    y.iter().zip(y_lower).all(|(&v, &lo)| v >= lo - tol)
}

/// Finite-difference sensitivities of a plant around one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityProbe {
    /// `M × N` matrix of `∂y_k / ∂u_n` estimates.
    pub jacobian: DMatrix<f64>,
    /// True iff no entry is below `-MONOTONICITY_TOL`.
    pub monotone: bool,
}

impl MonotonicityProbe {
    /// Sensitivity of the output at node `n` to its own control, if `n` is measured.
    pub fn diagonal(&self, measured: &[usize], n: usize) -> Option<f64> {
        measured
            .iter()
            .position(|&m| m == n)
            .map(|k| self.jacobian[(k, n)])
    }
}

/// Default probe step for a point `u0`.
pub fn default_probe_step(u0: &[f64]) -> f64 {
    1e-5 * crate::linalg::inf_norm(u0).max(1.0)
}

/// Central-difference Jacobian of `plant` at `u0` with step `h`.
///
/// The plant is evaluated at `u0 ± h·e_n` regardless of the control box; the
/// models accept any physically solvable input.
pub fn monotonicity_probe(plant: &dyn PlantModel, u0: &[f64], h: f64) -> Result<MonotonicityProbe> {
    let n = plant.control_dim();
    check_len(n, u0.len())?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidOperatingPoint(format!("probe step must be positive, got {h}")));
    }
    let m = plant.measured().len();
    let mut jacobian = DMatrix::zeros(m, n);
    let mut point = u0.to_vec();
    for dir in 0..n {
        let probe = |point: &[f64]| {
            plant.solve(point).map_err(|e| Error::ProbeFailure {
                direction: dir,
                source: Box::new(e),
            })
        };
        point[dir] = u0[dir] + h;
        let plus = probe(&point)?;
        point[dir] = u0[dir] - h;
        let minus = probe(&point)?;
        point[dir] = u0[dir];
        for k in 0..m {
            jacobian[(k, dir)] = (plus[k] - minus[k]) / (2.0 * h);
        }
    }
    let monotone = jacobian.iter().all(|&v| v >= -MONOTONICITY_TOL);
    Ok(MonotonicityProbe { jacobian, monotone })
}

/// Affine plant `y = offset + S·u` observed at `measured`.
///
/// Used for synthetic test corpora; monotone iff `S ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    measured: Vec<usize>,
    sensitivity: DMatrix<f64>,
    offset: Vec<f64>,
    u_lower: Vec<f64>,
    u_upper: Vec<f64>,
    y_lower: Vec<f64>,
    nominal: Vec<f64>,
}

impl LinearPlant {
    pub fn new(
        sensitivity: DMatrix<f64>,
        offset: Vec<f64>,
        measured: Vec<usize>,
        u_lower: Vec<f64>,
        u_upper: Vec<f64>,
        y_lower: Vec<f64>,
    ) -> Result<Self> {
        let n = sensitivity.ncols();
        let m = sensitivity.nrows();
        check_len(m, measured.len())?;
        check_len(m, offset.len())?;
        check_len(m, y_lower.len())?;
        check_len(n, u_lower.len())?;
        check_len(n, u_upper.len())?;
        if let Some(&bad) = measured.iter().find(|&&k| k >= n) {
            return Err(Error::InvalidModel(format!("measured node {bad} out of range")));
        }
        let mut sorted = measured.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != measured.len() {
            return Err(Error::InvalidModel("measured set has duplicates".into()));
        }
        if let Some(i) = (0..n).find(|&i| u_lower[i] > u_upper[i]) {
            return Err(Error::InvalidModel(format!(
                "control {i}: lower limit {} exceeds upper limit {}",
                u_lower[i], u_upper[i]
            )));
        }
        let nominal = u_lower.clone();
        Ok(Self {
            measured,
            sensitivity,
            offset,
            u_lower,
            u_upper,
            y_lower,
            nominal,
        })
    }

    pub fn with_nominal(mut self, nominal: Vec<f64>) -> Result<Self> {
        check_len(self.u_lower.len(), nominal.len())?;
        self.nominal = nominal;
        Ok(self)
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn sensitivity(&self) -> &DMatrix<f64> {
        &self.sensitivity
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn with_upper(mut self, u_upper: Vec<f64>) -> Result<Self> {
        check_len(self.u_lower.len(), u_upper.len())?;
        self.u_upper = u_upper;
        Ok(self)
    }

    pub fn set_offset(&mut self, row: usize, value: f64) {
        self.offset[row] = value;
    }

    pub fn set_sensitivity(&mut self, row: usize, col: usize, value: f64) {
        self.sensitivity[(row, col)] = value;
    }
}

impl PlantModel for LinearPlant {
    fn control_dim(&self) -> usize {
        self.sensitivity.ncols()
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
        check_len(self.control_dim(), u.len())?;
        Ok((0..self.sensitivity.nrows())
            .map(|k| {
                self.offset[k]
                    + self
                        .sensitivity
                        .row(k)
                        .iter()
                        .zip(u)
                        .map(|(s, x)| s * x)
                        .sum::<f64>()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(u_upper: f64, y_lower: f64) -> LinearPlant {
        LinearPlant::new(
            DMatrix::identity(1, 1),
            vec![0.0],
            vec![0],
            vec![0.0],
            vec![u_upper],
            vec![y_lower],
        )
        .unwrap()
    }

    #[test]
    fn feasibility_identity_plant() {
        let p = identity(2.0, 1.0);
        assert!(feasibility_check(&p, &[1.5], DEFAULT_FEAS_TOL).unwrap());
        assert!(!feasibility_check(&p, &[0.5], DEFAULT_FEAS_TOL).unwrap());
        assert!(!feasibility_check(&p, &[2.5], DEFAULT_FEAS_TOL).unwrap());
    }

    #[test]
    fn max_effort_examples() {
        assert!(max_effort_feasibility(&identity(2.0, 1.0), DEFAULT_FEAS_TOL).unwrap());
        assert!(!max_effort_feasibility(&identity(0.5, 1.0), DEFAULT_FEAS_TOL).unwrap());
        let p = LinearPlant::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            vec![0.0, 0.0],
            vec![0, 1],
            vec![0.0, 0.0],
            vec![0.5, 0.6],
            vec![1.0, 0.5],
        )
        .unwrap();
        let y = p.solve(p.u_upper()).unwrap();
        assert!((y[0] - 1.1).abs() < 1e-15 && (y[1] - 0.6).abs() < 1e-15);
        assert!(max_effort_feasibility(&p, DEFAULT_FEAS_TOL).unwrap());
        assert_eq!(
            feasibility_check(&p, p.u_upper(), DEFAULT_FEAS_TOL).unwrap(),
            max_effort_feasibility(&p, DEFAULT_FEAS_TOL).unwrap()
        );
    }

    #[test]
    fn probe_identity_and_counterexample() {
        let p = identity(2.0, 1.0);
        let probe = monotonicity_probe(&p, &[1.0], default_probe_step(&[1.0])).unwrap();
        assert!((probe.jacobian[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(probe.monotone);

        let neg = LinearPlant::new(
            DMatrix::from_element(1, 1, -1.0),
            vec![0.0],
            vec![0],
            vec![0.0],
            vec![2.0],
            vec![0.0],
        )
        .unwrap();
        let probe = monotonicity_probe(&neg, &[1.0], 1e-5).unwrap();
        assert!((probe.jacobian[(0, 0)] + 1.0).abs() < 1e-9);
        assert!(!probe.monotone);
    }

    #[test]
    fn dimension_errors() {
        let p = identity(2.0, 1.0);
        assert!(matches!(
            feasibility_check(&p, &[1.0, 2.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(monotonicity_probe(&p, &[1.0], 0.0).is_err());
    }
}
