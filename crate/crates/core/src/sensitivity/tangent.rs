use crate::error::Result;
use crate::field_seq::Control;
use crate::grid::Field;
use crate::operators::spectral::NeumannSpectrum;
use crate::operators::stencil::h1_norm;
use crate::params::Model;
use crate::state::StateTrajectory;

use super::{check_fresh, FrozenCoefficients, Linearization};

#[derive(Debug, Clone, PartialEq)]
pub struct TangentTriple {
    pub psi: Field,
    pub eta: Field,
    pub zeta: Field,
    pub t: f64,
}

impl TangentTriple {
    pub fn zero(grid: &crate::grid::Grid2D, t: f64) -> Self {
        Self {
            psi: Field::zeros(grid),
            eta: Field::zeros(grid),
            zeta: Field::zeros(grid),
            t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentTrajectory {
    pub steps: Vec<TangentTriple>,
    /// `max_n (|psi^n|_H1 + |zeta^n|) / |h|_Q`, or 0 for `h = 0`.
    pub boundedness_ratio: f64,
}

impl TangentTrajectory {
    /// `max_n |psi^n|_H1 + max_n |zeta^n|`.
    pub fn state_norm(&self) -> f64 {
        let psi = self.steps.iter().map(|s| h1_norm(&s.psi)).fold(0.0, f64::max);
        let zeta = self.steps.iter().map(|s| s.zeta.norm()).fold(0.0, f64::max);
        psi + zeta
    }
}

/// `(psi^n, zeta^n, h_n) -> (psi^{n+1}, eta^{n+1}, zeta^{n+1})` around the
/// coefficients of step `n`.
pub fn tangent_step_map(
    coeffs: &FrozenCoefficients,
    model: &Model,
    psi: &Field,
    zeta: &Field,
    h: &Field,
) -> Result<(Field, Field, Field)> {
    let grid = coeffs.phi.grid();
    for f in [psi, zeta, h] {
        grid.check_same(f.grid())?;
    }
    let spectrum = NeumannSpectrum::new(grid);
    let lin = Linearization {
        spectrum: &spectrum,
        model,
    };
    let (a, b, c) = lin.tangent(coeffs, psi.values(), zeta.values(), h.values())?;
    Ok((
        Field::from_values(grid, a)?,
        Field::from_values(grid, b)?,
        Field::from_values(grid, c)?,
    ))
}

pub fn step_tangent(
    prev: &TangentTriple,
    h_n: &Field,
    coeffs: &FrozenCoefficients,
    model: &Model,
) -> Result<TangentTriple> {
    let (psi, eta, zeta) = tangent_step_map(coeffs, model, &prev.psi, &prev.zeta, h_n)?;
    Ok(TangentTriple {
        psi,
        eta,
        zeta,
        t: prev.t + model.params.dt(),
    })
}

/// Tangent trajectory in direction `h` with zero initial data.
pub fn solve_tangent(u: &Control, h: &Control, traj: &StateTrajectory) -> Result<TangentTrajectory> {
    check_fresh(traj, u)?;
    u.check_shape(h)?;
    let grid = *traj.grid();
    let model = traj.model();
    let spectrum = NeumannSpectrum::new(&grid);
    let lin = Linearization {
        spectrum: &spectrum,
        model,
    };
    let mut steps = Vec::with_capacity(traj.nt() + 1);
    steps.push(TangentTriple::zero(&grid, 0.0));
    for n in 0..traj.nt() {
        let c = FrozenCoefficients::at(traj, n);
        let prev = &steps[n];
        let (psi, eta, zeta) = lin.tangent(&c, prev.psi.values(), prev.zeta.values(), h.get(n).values())?;
        steps.push(TangentTriple {
            psi: Field::from_values(&grid, psi)?,
            eta: Field::from_values(&grid, eta)?,
            zeta: Field::from_values(&grid, zeta)?,
            t: traj.step(n + 1).t,
        });
    }
    let mut out = TangentTrajectory {
        steps,
        boundedness_ratio: 0.0,
    };
    let hn = h.q_norm(traj.dt());
    if hn > 0.0 {
        out.boundedness_ratio = out.state_norm() / hn;
    }
    Ok(out)
}
