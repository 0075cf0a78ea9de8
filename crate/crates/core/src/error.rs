use thiserror::Error;

/// Errors raised by plant models, solvers, and the protocol harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("power flow did not converge after {iterations} iterations (residual {residual:.3e})")]
    PowerFlowInfeasible { iterations: usize, residual: f64 },

    #[error("power-flow jacobian is singular")]
    SingularJacobian,

    #[error("hydraulic solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    HydraulicInfeasible { iterations: usize, residual: f64 },

    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),

    #[error("plant solve failed at u = {u:?}: {source}")]
    SolverFailure { u: Vec<f64>, source: Box<Error> },

    #[error("monotonicity probe failed along control {direction}: {source}")]
    ProbeFailure { direction: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn solver_failure(u: &[f64], source: Error) -> Self {
        Error::SolverFailure {
            u: u.to_vec(),
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
