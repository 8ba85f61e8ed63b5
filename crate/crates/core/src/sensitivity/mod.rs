//! Exact derivative of the discrete control-to-state map and its transpose.
//!
//! With `N = -Delta_h`, `k = 1/dt + m`, `a0 = tau/dt`, `d = G'(phi^{n+1})`,
//! `J = k + N (a0 + N + d)` and `B = 1/dt - 1 + sigma^n + N`, the tangent
//! step reads
//! ```text
//! J psi'  = psi/dt + l1 psi + l2 zeta + N ((a0 + 2 c0) psi + zeta)
//! eta'    = a0 (psi' - psi) + N psi' + d psi' - 2 c0 psi - zeta
//! B zeta' = zeta/dt - sigma^{n+1} zeta - div(zeta grad phi^{n+1}) - div(sigma^n grad psi') + h
//! ```
//! and the adjoint sweep applies its transpose backwards in time. The step
//! multipliers are
//! ```text
//! r_n = B^{-1} R^{n+1} / dt
//! p_n = J^{-T} (P^{n+1} - dt div(sigma^n grad r_n)) / dt
//! q_n = N p_n,   z_n = p_n + tau q_n
//! ```
//! where `(P, R)` are the accumulated sensitivities of the cost with
//! respect to `(psi, zeta)`. The reduced gradient is `r_n + a5 u_n`.

mod adjoint;
mod tangent;

pub use adjoint::{
    adjoint_step_map, recover_pq, solve_adjoint, step_adjoint, AdjointCarry, AdjointTrajectory, AdjointTriple,
};
pub use tangent::{solve_tangent, step_tangent, tangent_step_map, TangentTrajectory, TangentTriple};

use crate::error::{Error, Result};
use crate::field_seq::Control;
use crate::grid::Field;
use crate::operators::spectral::NeumannSpectrum;
use crate::operators::stencil::{chemotaxis_div_adjoint_into, chemotaxis_div_into, neg_laplacian_into};
use crate::params::Model;
use crate::potential::convex_curvature;
use crate::state::scheme::{NutrientOperator, PhaseOperator};
use crate::state::StateTrajectory;

/// Coefficients of step `n -> n+1`, frozen along a converged trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenCoefficients {
    pub step: usize,
    pub phi: Field,
    pub sigma: Field,
    pub phi_next: Field,
    pub sigma_next: Field,
    /// `gamma_phi(phi^n, sigma^n)`
    pub lambda1: Field,
    /// `gamma_sigma(phi^n, sigma^n)`
    pub lambda2: Field,
    /// `F''(phi^n)`
    pub lambda: Field,
    /// Curvature of the implicit convex part at `phi^{n+1}`.
    pub convex_curv: Field,
}

impl FrozenCoefficients {
    pub fn at(traj: &StateTrajectory, n: usize) -> Self {
        let (a, b) = (traj.step(n), traj.step(n + 1));
        let model = traj.model();
        let g = model.gamma;
        let pot = model.potential;
        let zip = |f: &dyn Fn(f64, f64) -> f64| a.phi.zip_map(&a.sigma, f).expect("state fields share a grid");
        Self {
            step: n,
            phi: a.phi.clone(),
            sigma: a.sigma.clone(),
            phi_next: b.phi.clone(),
            sigma_next: b.sigma.clone(),
            lambda1: zip(&|p, s| g.d_phi(p, s)),
            lambda2: zip(&|p, s| g.d_sigma(p, s)),
            lambda: a.phi.map(|p| pot.eval_clamped(p, 2).0),
            convex_curv: b.phi.map(convex_curvature),
        }
    }

    /// `|F''(phi^n)|_inf`, finite as long as the trajectory stays separated.
    pub fn curvature_bound(&self) -> f64 {
        self.lambda.norm_inf()
    }
}

/// Largest `|F''(phi^n)|_inf` along the trajectory.
pub fn curvature_bound(traj: &StateTrajectory) -> f64 {
    let pot = traj.model().potential;
    traj.steps()
        .iter()
        .map(|s| s.phi.map(|p| pot.eval_clamped(p, 2).0).norm_inf())
        .fold(0.0, f64::max)
}

/// The linearized step and its transpose around frozen coefficients.
pub(crate) struct Linearization<'a> {
    pub spectrum: &'a NeumannSpectrum,
    pub model: &'a Model,
}

/// Output of one transposed step.
pub(crate) struct AdjointStep {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    /// Sensitivity carried to `psi^n`, without cost sources.
    pub to_psi: Vec<f64>,
    /// Sensitivity carried to `zeta^n`, without cost sources.
    pub to_zeta: Vec<f64>,
}

impl Linearization<'_> {
    fn consts(&self) -> (f64, f64, f64, f64) {
        let p = &self.model.params;
        let dt = p.dt();
        (dt, 1.0 / dt + p.m, p.tau / dt, 2.0 * p.c0)
    }

    /// `(psi, zeta, h) -> (psi', eta', zeta')`
    pub fn tangent(
        &self,
        c: &FrozenCoefficients,
        psi: &[f64],
        zeta: &[f64],
        h: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let grid = *self.spectrum.grid();
        let params = &self.model.params;
        let (dt, k, a0, c2) = self.consts();
        let n = grid.len();
        let (l1, l2, d) = (c.lambda1.values(), c.lambda2.values(), c.convex_curv.values());

        let mut t: Vec<f64> = (0..n).map(|i| (a0 + c2) * psi[i] + zeta[i]).collect();
        let mut w = vec![0.0; n];
        neg_laplacian_into(&grid, &t, &mut w);
        for i in 0..n {
            w[i] += psi[i] / dt + l1[i] * psi[i] + l2[i] * zeta[i];
        }
        let op = PhaseOperator::new(self.spectrum, k, a0, d);
        let (psi1, _) = op.solve_j(&w, params.cg_tol, params.cg_max_iter)?;

        let mut eta1 = vec![0.0; n];
        neg_laplacian_into(&grid, &psi1, &mut eta1);
        for i in 0..n {
            eta1[i] += a0 * (psi1[i] - psi[i]) + d[i] * psi1[i] - c2 * psi[i] - zeta[i];
        }

        let (sig, sig1, phi1) = (c.sigma.values(), c.sigma_next.values(), c.phi_next.values());
        let mut b = vec![0.0; n];
        chemotaxis_div_into(&grid, zeta, phi1, &mut b);
        chemotaxis_div_into(&grid, sig, &psi1, &mut t);
        for i in 0..n {
            b[i] = zeta[i] / dt - sig1[i] * zeta[i] - b[i] - t[i] + h[i];
        }
        let nut = NutrientOperator::new(self.spectrum, dt, sig);
        let mut zeta1 = vec![0.0; n];
        nut.solve(&b, &mut zeta1, params.cg_tol, params.cg_max_iter)?;
        Ok((psi1, eta1, zeta1))
    }

    /// Transpose of [`Self::tangent`] with respect to `(psi, zeta, h)`, given
    /// the sensitivities `(P', R')` of `(psi', zeta')`. The `h` part is
    /// `dt * r`.
    pub fn adjoint(&self, c: &FrozenCoefficients, p_next: &[f64], r_next: &[f64]) -> Result<AdjointStep> {
        let grid = *self.spectrum.grid();
        let params = &self.model.params;
        let (dt, k, a0, c2) = self.consts();
        let n = grid.len();
        let (l1, l2, d) = (c.lambda1.values(), c.lambda2.values(), c.convex_curv.values());
        let (sig, sig1, phi1) = (c.sigma.values(), c.sigma_next.values(), c.phi_next.values());

        let nut = NutrientOperator::new(self.spectrum, dt, sig);
        let mut r = vec![0.0; n];
        nut.solve(r_next, &mut r, params.cg_tol, params.cg_max_iter)?;
        for v in &mut r {
            *v /= dt;
        }

        let mut t = vec![0.0; n];
        chemotaxis_div_into(&grid, sig, &r, &mut t);
        let rhs: Vec<f64> = (0..n).map(|i| (p_next[i] - dt * t[i]) / dt).collect();
        let op = PhaseOperator::new(self.spectrum, k, a0, d);
        let (p, _) = op.solve_jt(&rhs, params.cg_tol, params.cg_max_iter)?;

        let mut np = vec![0.0; n];
        neg_laplacian_into(&grid, &p, &mut np);
        chemotaxis_div_adjoint_into(&grid, phi1, &r, &mut t);
        let to_psi = (0..n)
            .map(|i| p[i] + dt * (l1[i] * p[i] + c2 * np[i] + a0 * np[i]))
            .collect();
        let to_zeta = (0..n)
            .map(|i| r[i] + dt * (l2[i] * p[i] + np[i] - sig1[i] * r[i] - t[i]))
            .collect();
        Ok(AdjointStep { p, r, to_psi, to_zeta })
    }
}

pub(crate) fn check_fresh(traj: &StateTrajectory, u: &Control) -> Result<()> {
    if traj.control_hash() != u.checksum() {
        return Err(Error::StaleTrajectory);
    }
    Ok(())
}
