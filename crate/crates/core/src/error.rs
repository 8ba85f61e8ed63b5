use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("argument {value} outside the potential domain (-1, 1)")]
    PotentialDomain { value: f64 },

    #[error("Newton solver did not converge at step {step}: residual {residual:.3e} after {iterations} iterations")]
    NewtonNonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("Newton step collapsed at step {step}: damping fell below {min_damping:e}")]
    NewtonStepCollapse { step: usize, min_damping: f64 },

    #[error("linear solver ({context}) did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearNonConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("separation violated at step {step}: max |phi| = {max_abs}")]
    SeparationViolation { step: usize, max_abs: f64 },

    #[error("nutrient positivity violated at step {step}: min sigma = {min} at node ({i}, {j})")]
    PositivityViolation { step: usize, min: f64, i: usize, j: usize },

    #[error("nutrient operator lost definiteness at step {step}: min diagonal {min_diagonal:.3e}")]
    NutrientIndefinite { step: usize, min_diagonal: f64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("trajectory does not match the control (stale trajectory)")]
    StaleTrajectory,

    #[error("trajectory would need {bytes} bytes, above the {cap} byte cap")]
    MemoryCap { bytes: u64, cap: u64 },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical solvers (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NewtonNonConvergence { .. }
                | Error::NewtonStepCollapse { .. }
                | Error::LinearNonConvergence { .. }
                | Error::SeparationViolation { .. }
                | Error::PositivityViolation { .. }
                | Error::NutrientIndefinite { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
