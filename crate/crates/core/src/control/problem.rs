use crate::error::{Error, Result};
use crate::field_seq::{Control, FieldSeq};
use crate::grid::{Field, Grid2D};
use crate::state::StateTrajectory;

/// Tracking cost weights, targets and box bounds.
///
/// The cost is
/// ```text
/// J = a1/2 |phi - phiQ|_Q^2 + a2/2 |phi(T) - phiOmega|^2
///   + a3/2 |sigma - sigmaQ|_Q^2 + a4/2 |sigma(T) - sigmaOmega|^2 + a5/2 |u|_Q^2
/// ```
/// with running terms summed over `n = 0..nt-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    alphas: [f64; 5],
    phi_q: FieldSeq,
    phi_omega: Field,
    sigma_q: FieldSeq,
    sigma_omega: Field,
    u_min: FieldSeq,
    u_max: FieldSeq,
}

impl ControlProblem {
    pub fn new(
        alphas: [f64; 5],
        phi_q: FieldSeq,
        phi_omega: Field,
        sigma_q: FieldSeq,
        sigma_omega: Field,
        u_min: FieldSeq,
        u_max: FieldSeq,
    ) -> Result<Self> {
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "cost weights must be nonnegative, got {alphas:?}"
            )));
        }
        if alphas.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("cost weights must not all vanish".into()));
        }
        let grid = *phi_q.grid();
        phi_q.check_shape(&sigma_q)?;
        phi_q.check_shape(&u_min)?;
        phi_q.check_shape(&u_max)?;
        grid.check_same(phi_omega.grid())?;
        grid.check_same(sigma_omega.grid())?;
        for (lo, hi) in u_min.iter().zip(u_max.iter()) {
            if lo.values().iter().zip(hi.values()).any(|(a, b)| !(a <= b)) {
                return Err(Error::InvalidParameter("control bounds require u_min <= u_max".into()));
            }
        }
        for s in [&phi_q, &sigma_q, &u_min, &u_max] {
            if !s.is_finite() {
                return Err(Error::NonFinite("control problem data"));
            }
        }
        Ok(Self {
            alphas,
            phi_q,
            phi_omega,
            sigma_q,
            sigma_omega,
            u_min,
            u_max,
        })
    }

    /// Constant targets and constant bounds over `nt` steps.
    pub fn uniform(
        grid: &Grid2D,
        nt: usize,
        alphas: [f64; 5],
        phi_target: f64,
        sigma_target: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        Self::new(
            alphas,
            FieldSeq::constant(grid, nt, phi_target),
            Field::constant(grid, phi_target),
            FieldSeq::constant(grid, nt, sigma_target),
            Field::constant(grid, sigma_target),
            FieldSeq::constant(grid, nt, bounds.0),
            FieldSeq::constant(grid, nt, bounds.1),
        )
    }

    /// Targets read off a reference trajectory, so that the control that
    /// produced it tracks them exactly.
    pub fn from_trajectory(traj: &StateTrajectory, alphas: [f64; 5], bounds: (f64, f64)) -> Result<Self> {
        let grid = traj.grid();
        let nt = traj.nt();
        let steps = &traj.steps()[..nt];
        Self::new(
            alphas,
            FieldSeq::new(grid, steps.iter().map(|s| s.phi.clone()).collect())?,
            traj.last().phi.clone(),
            FieldSeq::new(grid, steps.iter().map(|s| s.sigma.clone()).collect())?,
            traj.last().sigma.clone(),
            FieldSeq::constant(grid, nt, bounds.0),
            FieldSeq::constant(grid, nt, bounds.1),
        )
    }

    pub fn alphas(&self) -> [f64; 5] {
        self.alphas
    }

    pub fn with_alphas(&self, alphas: [f64; 5]) -> Result<Self> {
        let mut p = self.clone();
        p.alphas = alphas;
        Self::new(
            p.alphas,
            p.phi_q,
            p.phi_omega,
            p.sigma_q,
            p.sigma_omega,
            p.u_min,
            p.u_max,
        )
    }

    pub fn grid(&self) -> &Grid2D {
        self.phi_q.grid()
    }

    pub fn nt(&self) -> usize {
        self.phi_q.len()
    }

    pub fn phi_q(&self) -> &FieldSeq {
        &self.phi_q
    }

    pub fn phi_omega(&self) -> &Field {
        &self.phi_omega
    }

    pub fn sigma_q(&self) -> &FieldSeq {
        &self.sigma_q
    }

    pub fn sigma_omega(&self) -> &Field {
        &self.sigma_omega
    }

    pub fn u_min(&self) -> &FieldSeq {
        &self.u_min
    }

    pub fn u_max(&self) -> &FieldSeq {
        &self.u_max
    }

    pub fn check_trajectory(&self, traj: &StateTrajectory) -> Result<()> {
        self.grid().check_same(traj.grid())?;
        if traj.nt() != self.nt() {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} steps, cost expects {}",
                traj.nt(),
                self.nt()
            )));
        }
        Ok(())
    }

    /// `a1 (phi^n - phiQ^n)`
    pub fn g1(&self, traj: &StateTrajectory, n: usize) -> Field {
        diff(&traj.step(n).phi, self.phi_q.get(n)).scaled(self.alphas[0])
    }

    /// `a3 (sigma^n - sigmaQ^n)`
    pub fn g2(&self, traj: &StateTrajectory, n: usize) -> Field {
        diff(&traj.step(n).sigma, self.sigma_q.get(n)).scaled(self.alphas[2])
    }

    /// `a2 (phi^nt - phiOmega)`
    pub fn g3(&self, traj: &StateTrajectory) -> Field {
        diff(&traj.last().phi, &self.phi_omega).scaled(self.alphas[1])
    }

    /// `a4 (sigma^nt - sigmaOmega)`
    pub fn g4(&self, traj: &StateTrajectory) -> Field {
        diff(&traj.last().sigma, &self.sigma_omega).scaled(self.alphas[3])
    }
}

fn diff(a: &Field, b: &Field) -> Field {
    a.sub(b).expect("checked grids")
}

/// Cost value with its five parts, each already weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostValue {
    pub total: f64,
    pub phi_q: f64,
    pub phi_t: f64,
    pub sigma_q: f64,
    pub sigma_t: f64,
    pub control: f64,
}

pub fn cost_eval(traj: &StateTrajectory, u: &Control, prob: &ControlProblem) -> Result<CostValue> {
    prob.check_trajectory(traj)?;
    prob.u_min.check_shape(u)?;
    let dt = traj.dt();
    let a = prob.alphas;
    let mut run_phi = 0.0;
    let mut run_sigma = 0.0;
    for n in 0..traj.nt() {
        let s = traj.step(n);
        let dp = diff(&s.phi, prob.phi_q.get(n));
        let ds = diff(&s.sigma, prob.sigma_q.get(n));
        run_phi += dp.inner(&dp)?;
        run_sigma += ds.inner(&ds)?;
    }
    let dpt = diff(&traj.last().phi, &prob.phi_omega);
    let dst = diff(&traj.last().sigma, &prob.sigma_omega);
    let v = CostValue {
        total: 0.0,
        phi_q: 0.5 * a[0] * dt * run_phi,
        phi_t: 0.5 * a[1] * dpt.inner(&dpt)?,
        sigma_q: 0.5 * a[2] * dt * run_sigma,
        sigma_t: 0.5 * a[3] * dst.inner(&dst)?,
        control: 0.5 * a[4] * u.q_inner(u, dt)?,
    };
    Ok(CostValue {
        total: v.phi_q + v.phi_t + v.sigma_q + v.sigma_t + v.control,
        ..v
    })
}

/// Pointwise clamp into `[u_min, u_max]`.
pub fn project_admissible(u: &Control, prob: &ControlProblem) -> Result<Control> {
    prob.u_min.check_shape(u)?;
    let lo = u.zip_map(&prob.u_min, f64::max)?;
    lo.zip_map(&prob.u_max, f64::min)
}

pub fn is_feasible(u: &Control, prob: &ControlProblem) -> bool {
    project_admissible(u, prob).map(|p| &p == u).unwrap_or(false)
}

/// `|u - P(u - g)|_Q`; zero exactly when the discrete variational
/// inequality holds.
pub fn stationarity_residual(u: &Control, gradient: &Control, prob: &ControlProblem, dt: f64) -> Result<f64> {
    let step = u.zip_map(gradient, |a, b| a - b)?;
    let p = project_admissible(&step, prob)?;
    Ok(u.zip_map(&p, |a, b| a - b)?.q_norm(dt))
}
