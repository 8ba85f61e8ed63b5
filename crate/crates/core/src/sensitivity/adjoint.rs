use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::field_seq::FieldSeq;
use crate::grid::{Field, Grid2D};
use crate::operators::spectral::NeumannSpectrum;
use crate::operators::stencil::neg_laplacian_into;
use crate::params::Model;
use crate::state::StateTrajectory;

use super::{FrozenCoefficients, Linearization};

/// Multipliers of one step: `p` and `q` of the phase and chemical potential
/// equations, `r` of the nutrient equation, and `z = p + tau q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTriple {
    pub p: Field,
    pub q: Field,
    pub r: Field,
    pub z: Field,
    pub t: f64,
}

/// Sensitivities of the cost with respect to `(psi^n, zeta^n)`, passed from
/// step `n` to step `n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointCarry {
    pub to_psi: Field,
    pub to_zeta: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    /// `nt + 1` entries; entry `n < nt` holds the multipliers of step
    /// `n -> n+1`, the last entry holds the terminal data.
    pub steps: Vec<AdjointTriple>,
    pub control_hash: u64,
}

impl AdjointTrajectory {
    pub fn nt(&self) -> usize {
        self.steps.len() - 1
    }

    /// `r_n` for `n = 0..nt-1`, the part of the reduced gradient coming from
    /// the state.
    pub fn r_seq(&self) -> FieldSeq {
        let grid = *self.steps[0].r.grid();
        FieldSeq::new(&grid, self.steps[..self.nt()].iter().map(|s| s.r.clone()).collect())
            .expect("fields share a grid")
    }
}

/// Solves `(N + 1/tau) p = z / tau` and returns `(p, (z - p)/tau)`.
pub fn recover_pq(z: &Field, tau: f64) -> Result<(Field, Field)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let spectrum = NeumannSpectrum::new(z.grid());
    Ok(recover_with(&spectrum, z, tau))
}

fn recover_with(spectrum: &NeumannSpectrum, z: &Field, tau: f64) -> (Field, Field) {
    let mut p = z.clone();
    spectrum.apply_symbol(p.values_mut(), |nu| 1.0 / (1.0 + tau * nu));
    let q = z.zip_map(&p, |a, b| (a - b) / tau).expect("same grid");
    (p, q)
}

fn triple(grid: &Grid2D, step: super::AdjointStep, tau: f64, t: f64) -> Result<AdjointTriple> {
    let mut q = vec![0.0; grid.len()];
    neg_laplacian_into(grid, &step.p, &mut q);
    let z = step.p.iter().zip(&q).map(|(a, b)| a + tau * b).collect();
    Ok(AdjointTriple {
        p: Field::from_values(grid, step.p)?,
        q: Field::from_values(grid, q)?,
        r: Field::from_values(grid, step.r)?,
        z: Field::from_values(grid, z)?,
        t,
    })
}

/// Transpose of the tangent step map: `(P', R') -> (to_psi, to_zeta, to_h)`.
pub fn adjoint_step_map(
    coeffs: &FrozenCoefficients,
    model: &Model,
    p_next: &Field,
    r_next: &Field,
) -> Result<(Field, Field, Field)> {
    let grid = coeffs.phi.grid();
    grid.check_same(p_next.grid())?;
    grid.check_same(r_next.grid())?;
    let spectrum = NeumannSpectrum::new(grid);
    let lin = Linearization {
        spectrum: &spectrum,
        model,
    };
    let s = lin.adjoint(coeffs, p_next.values(), r_next.values())?;
    let dt = model.params.dt();
    let h = s.r.iter().map(|v| dt * v).collect();
    Ok((
        Field::from_values(grid, s.to_psi)?,
        Field::from_values(grid, s.to_zeta)?,
        Field::from_values(grid, h)?,
    ))
}

/// One backward step with running sources `g1`, `g2` of step `n`.
pub fn step_adjoint(
    next: &AdjointCarry,
    coeffs: &FrozenCoefficients,
    g1: &Field,
    g2: &Field,
    model: &Model,
) -> Result<(AdjointTriple, AdjointCarry)> {
    let grid = *coeffs.phi.grid();
    let spectrum = NeumannSpectrum::new(&grid);
    let lin = Linearization {
        spectrum: &spectrum,
        model,
    };
    backward(&lin, next, coeffs, g1, g2)
}

fn backward(
    lin: &Linearization,
    next: &AdjointCarry,
    coeffs: &FrozenCoefficients,
    g1: &Field,
    g2: &Field,
) -> Result<(AdjointTriple, AdjointCarry)> {
    let grid = *coeffs.phi.grid();
    let params = &lin.model.params;
    let dt = params.dt();
    let mut s = lin.adjoint(coeffs, next.to_psi.values(), next.to_zeta.values())?;
    let to_psi = std::mem::take(&mut s.to_psi);
    let to_zeta = std::mem::take(&mut s.to_zeta);
    let mut carry = AdjointCarry {
        to_psi: Field::from_values(&grid, to_psi)?,
        to_zeta: Field::from_values(&grid, to_zeta)?,
    };
    carry.to_psi.axpy(dt, g1)?;
    carry.to_zeta.axpy(dt, g2)?;
    let t = params.time(coeffs.step);
    Ok((triple(&grid, s, params.tau, t)?, carry))
}

/// Backward sweep from the terminal data `z = g3`, `r = g4`.
pub fn solve_adjoint(traj: &StateTrajectory, prob: &ControlProblem) -> Result<AdjointTrajectory> {
    prob.check_trajectory(traj)?;
    let grid = *traj.grid();
    let model = traj.model();
    let nt = traj.nt();
    let spectrum = NeumannSpectrum::new(&grid);
    let lin = Linearization {
        spectrum: &spectrum,
        model,
    };
    let g3 = prob.g3(traj);
    let g4 = prob.g4(traj);
    let (p, q) = recover_with(&spectrum, &g3, model.params.tau);
    let terminal = AdjointTriple {
        p,
        q,
        r: g4.clone(),
        z: g3.clone(),
        t: traj.last().t,
    };
    let mut carry = AdjointCarry {
        to_psi: g3,
        to_zeta: g4,
    };
    let mut steps = Vec::with_capacity(nt + 1);
    for n in (0..nt).rev() {
        let c = FrozenCoefficients::at(traj, n);
        let (a, next) = backward(&lin, &carry, &c, &prob.g1(traj, n), &prob.g2(traj, n))?;
        if !a.r.is_finite() || !a.p.is_finite() {
            return Err(Error::NonFinite("adjoint step"));
        }
        steps.push(a);
        carry = next;
    }
    steps.reverse();
    steps.push(terminal);
    Ok(AdjointTrajectory {
        steps,
        control_hash: traj.control_hash(),
    })
}
