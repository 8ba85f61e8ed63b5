use crate::error::{Error, Result};
use crate::field_seq::Control;
use crate::params::Model;
use crate::sensitivity::{solve_adjoint, AdjointTrajectory};
use crate::state::{InitialData, SolverOptions, StateTrajectory, Stepper};

use super::{cost_eval, project_admissible, reduced_gradient, stationarity_residual, ControlProblem, CostValue};

/// How the first trial step of each iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Last accepted step times `step_growth`.
    Growth,
    /// Barzilai-Borwein `<s, s> / <s, y>` from the last two iterates, falling
    /// back to `Growth` when the curvature estimate is not positive.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_outer_iters: usize,
    pub armijo_c1: f64,
    pub armijo_shrink: f64,
    /// First trial step; `None` uses `1 / (1 + a5)`.
    pub initial_step: Option<f64>,
    /// Factor applied to the last accepted step to get the next first trial.
    pub step_growth: f64,
    pub step_rule: StepRule,
    /// Upper bound on any trial step.
    pub max_step: f64,
    pub stationarity_tol: f64,
    pub min_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            armijo_c1: 1e-4,
            armijo_shrink: 0.5,
            initial_step: None,
            step_growth: 2.0,
            step_rule: StepRule::BarzilaiBorwein,
            max_step: 1e10,
            stationarity_tol: 1e-6,
            min_step: 1e-14,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("optimizer: {what}")));
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return bad("armijo_c1 must lie in (0, 1)");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo_shrink must lie in (0, 1)");
        }
        if !(self.step_growth >= 1.0 && self.step_growth.is_finite()) {
            return bad("step_growth must be at least 1");
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad("initial_step must be positive");
            }
        }
        if !(self.stationarity_tol >= 0.0) || !(self.min_step > 0.0) {
            return bad("stationarity_tol must be nonnegative and min_step positive");
        }
        if !(self.max_step >= self.min_step) {
            return bad("max_step must be at least min_step");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: CostValue,
    pub stationarity: f64,
    /// Accepted step (0 for the initial row).
    pub step: f64,
    pub armijo_rejects: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Stationary,
    MaxIterations,
    StepCollapse,
    SolverFailure,
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub records: Vec<IterationRecord>,
    pub control: Control,
    pub trajectory: StateTrajectory,
    pub adjoint: AdjointTrajectory,
    pub gradient: Control,
    pub stop: StopReason,
    /// Set when a forward or adjoint solve failed during the search.
    pub failure: Option<String>,
}

impl OptimizationReport {
    pub fn initial_cost(&self) -> f64 {
        self.records[0].cost.total
    }

    pub fn final_cost(&self) -> f64 {
        self.records.last().expect("at least the initial row").cost.total
    }

    pub fn final_stationarity(&self) -> f64 {
        self.records.last().expect("at least the initial row").stationarity
    }
}

struct Iterate {
    u: Control,
    traj: StateTrajectory,
    cost: CostValue,
}

pub fn optimize(
    prob: &ControlProblem,
    init: &InitialData,
    u0: &Control,
    model: &Model,
    options: SolverOptions,
    config: &OptimizerConfig,
) -> Result<OptimizationReport> {
    config.validate()?;
    if model.params.nt != prob.nt() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} steps, cost expects {}",
            model.params.nt,
            prob.nt()
        )));
    }
    let stepper = Stepper::new(init.grid(), *model, options);
    let dt = model.params.dt();
    let evaluate = |u: Control| -> Result<Iterate> {
        let traj = stepper.solve(init, &u)?;
        let cost = cost_eval(&traj, &u, prob)?;
        Ok(Iterate { u, traj, cost })
    };

    let mut cur = evaluate(project_admissible(u0, prob)?)?;
    let mut adj = solve_adjoint(&cur.traj, prob)?;
    let mut grad = reduced_gradient(&cur.u, &adj, prob)?;
    let mut stat = stationarity_residual(&cur.u, &grad, prob, dt)?;
    let mut records = vec![IterationRecord {
        iter: 0,
        cost: cur.cost,
        stationarity: stat,
        step: 0.0,
        armijo_rejects: 0,
    }];
    let mut step = config
        .initial_step
        .unwrap_or(1.0 / (1.0 + prob.alphas()[4]))
        .min(config.max_step);
    let mut stop = StopReason::MaxIterations;
    let mut failure = None;

    'outer: for iter in 1..=config.max_outer_iters {
        if stat <= config.stationarity_tol {
            stop = StopReason::Stationary;
            break;
        }
        let mut rejects = 0;
        let next = loop {
            let trial_u = project_admissible(&cur.u.zip_map(&grad, |a, g| a - step * g)?, prob)?;
            let decrease = grad.q_inner(&cur.u.zip_map(&trial_u, |a, b| a - b)?, dt)?;
            match evaluate(trial_u) {
                Ok(trial) if trial.cost.total <= cur.cost.total - config.armijo_c1 * decrease => break trial,
                Ok(_) => {}
                Err(e) if e.is_solver_failure() => {
                    log::debug!("trial step {step:.3e} failed: {e}");
                }
                Err(e) => return Err(e),
            }
            rejects += 1;
            step *= config.armijo_shrink;
            if step < config.min_step {
                stop = StopReason::StepCollapse;
                break 'outer;
            }
        };
        let next_adj = match solve_adjoint(&next.traj, prob) {
            Ok(a) => a,
            Err(e) => {
                failure = Some(e.to_string());
                stop = StopReason::SolverFailure;
                break;
            }
        };
        debug_assert!(next.cost.total <= cur.cost.total);
        let next_grad = reduced_gradient(&next.u, &next_adj, prob)?;
        let accepted = step;
        step = match config.step_rule {
            StepRule::Growth => step * config.step_growth,
            StepRule::BarzilaiBorwein => {
                let s = next.u.zip_map(&cur.u, |a, b| a - b)?;
                let y = next_grad.zip_map(&grad, |a, b| a - b)?;
                let (ss, sy) = (s.q_inner(&s, dt)?, s.q_inner(&y, dt)?);
                if sy > 0.0 && ss > 0.0 {
                    ss / sy
                } else {
                    step * config.step_growth
                }
            }
        }
        .clamp(config.min_step, config.max_step);
        cur = next;
        adj = next_adj;
        grad = next_grad;
        stat = stationarity_residual(&cur.u, &grad, prob, dt)?;
        records.push(IterationRecord {
            iter,
            cost: cur.cost,
            stationarity: stat,
            step: accepted,
            armijo_rejects: rejects,
        });
        log::info!(
            "iter {iter}: J = {:.6e}, stationarity = {stat:.3e}, step = {accepted:.3e}",
            cur.cost.total
        );
    }
    if stop == StopReason::MaxIterations && stat <= config.stationarity_tol {
        stop = StopReason::Stationary;
    }

    Ok(OptimizationReport {
        records,
        control: cur.u,
        trajectory: cur.traj,
        adjoint: adj,
        gradient: grad,
        stop,
        failure,
    })
}
