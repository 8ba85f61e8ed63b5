//! Cost functional, admissible set and projected-gradient optimization.

mod optimizer;
mod problem;

pub use optimizer::{optimize, IterationRecord, OptimizationReport, OptimizerConfig, StepRule, StopReason};
pub use problem::{cost_eval, is_feasible, project_admissible, stationarity_residual, ControlProblem, CostValue};

use crate::error::Result;
use crate::field_seq::Control;
use crate::sensitivity::AdjointTrajectory;

/// `g_n = r_n + a5 u_n`.
pub fn reduced_gradient(u: &Control, adj: &AdjointTrajectory, prob: &ControlProblem) -> Result<Control> {
    let a5 = prob.alphas()[4];
    adj.r_seq().zip_map(u, |r, v| r + a5 * v)
}

/// `|u - clamp(-r/a5, u_min, u_max)|_Q`; requires `a5 > 0`.
pub fn projection_gap(u: &Control, adj: &AdjointTrajectory, prob: &ControlProblem, dt: f64) -> Result<f64> {
    let a5 = prob.alphas()[4];
    if !(a5 > 0.0) {
        return Err(crate::error::Error::InvalidParameter(
            "the projection characterization needs a positive control weight".into(),
        ));
    }
    let target = project_admissible(&adj.r_seq().map(|r| -r / a5), prob)?;
    Ok(u.zip_map(&target, |a, b| a - b)?.q_norm(dt))
}

#[cfg(test)]
mod tests;
