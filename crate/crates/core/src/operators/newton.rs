//! Damped Newton iteration that keeps iterates inside `(-1, 1)`.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::operators::cg::SolveReport;
use crate::potential::S_GUARD;

/// A nonlinear system `R(x) = 0` with a Newton step oracle.
pub trait NewtonProblem {
    fn residual(&mut self, x: &Field) -> Result<Field>;

    /// Solves `J(x) delta = -r`. Returns the step and the number of inner
    /// linear iterations spent.
    fn step(&mut self, x: &Field, r: &Field) -> Result<(Field, usize)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates must satisfy `|x|_inf <= bound`.
    pub bound: f64,
    pub min_damping: f64,
    /// Time-step index used to label failures.
    pub step_index: usize,
}

impl NewtonSettings {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            bound: 1.0 - S_GUARD,
            min_damping: 1e-8,
            step_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub solve: SolveReport,
    pub linear_iterations: usize,
}

/// Domain-size independent residual norm.
pub fn rms_norm(r: &Field) -> f64 {
    r.norm() / r.grid().area().sqrt()
}

pub fn newton_safeguarded(
    problem: &mut dyn NewtonProblem,
    x0: Field,
    settings: &NewtonSettings,
) -> Result<(Field, NewtonReport)> {
    if !(x0.norm_inf() <= settings.bound) {
        return Err(Error::SeparationViolation {
            step: settings.step_index,
            max_abs: x0.norm_inf(),
        });
    }
    let mut x = x0;
    let mut r = problem.residual(&x)?;
    let mut rn = rms_norm(&r);
    let mut iterations = 0;
    let mut linear_iterations = 0;
    while rn > settings.tol && iterations < settings.max_iter {
        let (delta, lin) = problem.step(&x, &r)?;
        linear_iterations += lin;
        let mut damping = 1.0;
        loop {
            let mut trial = x.clone();
            trial.axpy(damping, &delta)?;
            if trial.norm_inf() <= settings.bound {
                let rt = problem.residual(&trial)?;
                let rtn = rms_norm(&rt);
                if rtn < rn || rtn <= settings.tol {
                    x = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
            }
            damping *= 0.5;
            if damping < settings.min_damping {
                return Err(Error::NewtonStepCollapse {
                    step: settings.step_index,
                    min_damping: settings.min_damping,
                });
            }
        }
        iterations += 1;
    }
    if !rn.is_finite() {
        return Err(Error::NonFinite("Newton residual"));
    }
    if rn > settings.tol {
        return Err(Error::NewtonNonConvergence {
            step: settings.step_index,
            iterations,
            residual: rn,
        });
    }
    Ok((
        x,
        NewtonReport {
            solve: SolveReport {
                iterations,
                final_residual: rn,
                converged: true,
            },
            linear_iterations,
        },
    ))
}
