use crate::error::Result;
use crate::field_seq::Control;
use crate::operators::stencil::gradient_inner;
use crate::potential::{xlnx, LogPotential};

use super::{StateTrajectory, StateTriple};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FreeEnergy {
    pub total: f64,
    pub ginzburg_landau: f64,
    pub chemo_mass: f64,
}

/// `E = 1/2 |grad phi|^2 + F(phi)` and `M = sigma (ln sigma - 1) + sigma (1 - phi)`,
/// integrated over the domain. Nonpositive `sigma` contributes no entropy.
pub fn free_energy(s: &StateTriple, pot: &LogPotential) -> FreeEnergy {
    let grad = 0.5 * gradient_inner(&s.phi, &s.phi).expect("state fields share a grid");
    let bulk = s
        .phi
        .map(|v| pot.value_closed(v.clamp(-1.0, 1.0)).expect("clamped"))
        .integral();
    let m = s
        .phi
        .zip_map(&s.sigma, |p, sg| xlnx(sg) - sg + sg * (1.0 - p))
        .expect("state fields share a grid")
        .integral();
    FreeEnergy {
        total: grad + bulk + m,
        ginzburg_landau: grad + bulk,
        chemo_mass: m,
    }
}

/// Residuals of the scheme tested against the constant function, for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassResidual {
    pub step: usize,
    pub phi: f64,
    pub sigma: f64,
    /// Scale of the largest term in each balance; the relative residual is
    /// `residual / (1 + scale)`.
    pub phi_scale: f64,
    pub sigma_scale: f64,
}

impl MassResidual {
    pub fn relative_phi(&self) -> f64 {
        self.phi / (1.0 + self.phi_scale)
    }

    pub fn relative_sigma(&self) -> f64 {
        self.sigma / (1.0 + self.sigma_scale)
    }

    pub fn worst_relative(&self) -> f64 {
        self.relative_phi().max(self.relative_sigma())
    }
}

pub fn mass_balance_report(traj: &StateTrajectory, u: &Control) -> Result<Vec<MassResidual>> {
    traj.grid().check_same(u.grid())?;
    let model = traj.model();
    let dt = traj.dt();
    let m = model.params.m;
    let gamma = model.gamma;
    let mut out = Vec::with_capacity(traj.nt());
    for n in 0..traj.nt() {
        let (a, b) = (traj.step(n), traj.step(n + 1));
        let (p0, p1) = (a.phi.integral(), b.phi.integral());
        let src = a.phi.zip_map(&a.sigma, |p, s| gamma.value(p, s))?.integral();
        let rphi = (p1 - p0) / dt + m * p1 - src;
        let phi_scale = (p1.abs() + p0.abs()) / dt + m * p1.abs() + src.abs();

        let (s0, s1) = (a.sigma.integral(), b.sigma.integral());
        let logistic = a.sigma.zip_map(&b.sigma, |x, y| y - x * y)?.integral();
        let un = u.get(n).integral();
        let rsig = (s1 - s0) / dt - logistic - un;
        let sigma_scale = (s1.abs() + s0.abs()) / dt + logistic.abs() + un.abs();
        out.push(MassResidual {
            step: n,
            phi: rphi.abs(),
            sigma: rsig.abs(),
            phi_scale,
            sigma_scale,
        });
    }
    Ok(out)
}
