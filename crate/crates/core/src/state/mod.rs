//! Forward solver for the phase / chemical potential / nutrient system.
//!
//! One step advances `(phi, sigma)` from `t_n` to `t_{n+1}`:
//!
//! 1. phase substep (nonlinear, Newton): with `G(s) = ln((1+s)/(1-s))`,
//!    ```text
//!    (phi' - phi)/dt - Delta_h mu' + m phi' = gamma(phi, sigma)
//!    mu' = tau (phi' - phi)/dt - Delta_h phi' + G(phi') - 2 c0 phi - sigma
//!    ```
//! 2. nutrient substep (linear, CG):
//!    ```text
//!    (sigma' - sigma)/dt - Delta_h sigma' + div(sigma grad phi') = sigma' - sigma sigma' + u_n
//!    ```
//!
//! The convex part of the potential is implicit and the concave part
//! explicit, so the phase substep is uniquely solvable for every `dt`.

mod monitor;
pub(crate) mod scheme;

pub use monitor::{free_energy, mass_balance_report, FreeEnergy, MassResidual};

use crate::error::{Error, Result};
use crate::field_seq::Control;
use crate::gamma::GammaSource;
use crate::grid::{Field, Grid2D};
use crate::operators::newton::{newton_safeguarded, NewtonProblem, NewtonSettings};
use crate::operators::spectral::NeumannSpectrum;
use crate::operators::stencil::{chemotaxis_div_into, laplacian_into, neg_laplacian_into};
use crate::params::Model;
use crate::potential::{convex_curvature, convex_derivative, S_GUARD};
use scheme::{NutrientOperator, PhaseOperator};

/// Tolerated undershoot of the nutrient below zero before a warning.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Trajectories above this size are refused.
pub const MEMORY_CAP_BYTES: u64 = 4 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct StateTriple {
    pub phi: Field,
    pub mu: Field,
    pub sigma: Field,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    phi0: Field,
    sigma0: Field,
}

impl InitialData {
    /// Requires `|phi0|_inf <= 1 - delta_init` and `sigma0 >= 0`.
    pub fn new(phi0: Field, sigma0: Field, delta_init: f64) -> Result<Self> {
        phi0.grid().check_same(sigma0.grid())?;
        if !(S_GUARD..1.0).contains(&delta_init) {
            return Err(Error::InvalidParameter(format!(
                "delta_init must lie in [{S_GUARD:e}, 1), got {delta_init}"
            )));
        }
        if !phi0.is_finite() || !sigma0.is_finite() {
            return Err(Error::NonFinite("initial data"));
        }
        if phi0.norm_inf() > 1.0 - delta_init {
            return Err(Error::InvalidParameter(format!(
                "initial phase |phi0|_inf = {} exceeds 1 - delta_init = {}",
                phi0.norm_inf(),
                1.0 - delta_init
            )));
        }
        if sigma0.min() < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "initial nutrient must be nonnegative, min = {}",
                sigma0.min()
            )));
        }
        Ok(Self { phi0, sigma0 })
    }

    pub fn phi0(&self) -> &Field {
        &self.phi0
    }

    pub fn sigma0(&self) -> &Field {
        &self.sigma0
    }

    pub fn grid(&self) -> &Grid2D {
        self.phi0.grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound `M` on `|u|_inf`.
    pub control_cap: f64,
    /// Treat nutrient undershoot below `-POSITIVITY_TOL` as an error.
    pub strict_positivity: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            control_cap: f64::INFINITY,
            strict_positivity: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub newton_iters: usize,
    pub cg_iters: usize,
    pub clamp_events: usize,
}

/// Diagnostics recorded for every time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMonitor {
    pub step: usize,
    pub time: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub mass_phi: f64,
    pub mass_sigma: f64,
    pub energy: FreeEnergy,
    pub stats: StepStats,
}

impl StepMonitor {
    fn observe(step: usize, s: &StateTriple, pot: &crate::potential::LogPotential, stats: StepStats) -> Self {
        Self {
            step,
            time: s.t,
            phi_min: s.phi.min(),
            phi_max: s.phi.max(),
            sigma_min: s.sigma.min(),
            sigma_max: s.sigma.max(),
            mass_phi: s.phi.integral(),
            mass_sigma: s.sigma.integral(),
            energy: free_energy(s, pot),
            stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    steps: Vec<StateTriple>,
    model: Model,
    control_hash: u64,
    monitors: Vec<StepMonitor>,
}

impl StateTrajectory {
    pub fn steps(&self) -> &[StateTriple] {
        &self.steps
    }

    pub fn step(&self, n: usize) -> &StateTriple {
        &self.steps[n]
    }

    pub fn last(&self) -> &StateTriple {
        self.steps.last().expect("trajectory is never empty")
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn grid(&self) -> &Grid2D {
        self.steps[0].phi.grid()
    }

    pub fn nt(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.model.params.dt()
    }

    pub fn control_hash(&self) -> u64 {
        self.control_hash
    }

    pub fn monitors(&self) -> &[StepMonitor] {
        &self.monitors
    }

    /// `1 - max_n |phi^n|_inf`.
    pub fn separation_margin(&self) -> f64 {
        1.0 - self.steps.iter().fold(0.0f64, |m, s| m.max(s.phi.norm_inf()))
    }

    pub fn min_sigma(&self) -> f64 {
        self.steps.iter().fold(f64::INFINITY, |m, s| m.min(s.sigma.min()))
    }

    pub fn total_newton_iters(&self) -> usize {
        self.monitors.iter().map(|m| m.stats.newton_iters).sum()
    }
}

/// Reusable per-grid workspace for stepping.
pub struct Stepper {
    model: Model,
    spectrum: NeumannSpectrum,
    options: SolverOptions,
}

struct PhaseProblem<'a> {
    op: PhaseOperator<'a>,
    grid: Grid2D,
    k: f64,
    a0: f64,
    phi_old: &'a [f64],
    /// `-a0 phi - 2 c0 phi - sigma`, the data part of `mu'`
    mu_data: Vec<f64>,
    /// `phi / dt + gamma(phi, sigma)`
    rhs: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl PhaseProblem<'_> {
    fn mu(&self, phi: &[f64]) -> Vec<f64> {
        let mut mu = vec![0.0; phi.len()];
        neg_laplacian_into(&self.grid, phi, &mut mu);
        for k in 0..phi.len() {
            mu[k] += self.a0 * phi[k] + convex_derivative(phi[k]) + self.mu_data[k];
        }
        mu
    }

    fn raw_residual(&self, phi: &[f64]) -> Vec<f64> {
        let mu = self.mu(phi);
        let mut r = vec![0.0; phi.len()];
        neg_laplacian_into(&self.grid, &mu, &mut r);
        for k in 0..phi.len() {
            r[k] += self.k * phi[k] - self.rhs[k];
        }
        r
    }
}

impl NewtonProblem for PhaseProblem<'_> {
    fn residual(&mut self, x: &Field) -> Result<Field> {
        let mut r = self.raw_residual(x.values());
        self.op.apply_jref_inv(&mut r);
        Field::from_values(&self.grid, r)
    }

    fn step(&mut self, x: &Field, _r: &Field) -> Result<(Field, usize)> {
        let d: Vec<f64> = x.values().iter().map(|&s| convex_curvature(s)).collect();
        let op = PhaseOperator::new(self.op_spectrum(), self.k, self.a0, &d);
        let mut r = self.raw_residual(x.values());
        for v in &mut r {
            *v = -*v;
        }
        let (delta, rep) = op.solve_j(&r, self.tol, self.max_iter)?;
        Ok((Field::from_values(&self.grid, delta)?, rep.iterations))
    }
}

impl<'a> PhaseProblem<'a> {
    fn op_spectrum(&self) -> &'a NeumannSpectrum {
        self.op.spectrum()
    }
}

impl Stepper {
    pub fn new(grid: &Grid2D, model: Model, options: SolverOptions) -> Self {
        Self {
            model,
            spectrum: NeumannSpectrum::new(grid),
            options,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn grid(&self) -> &Grid2D {
        self.spectrum.grid()
    }

    /// `mu^0 = -Delta_h phi0 + F'(phi0) - sigma0`, reported only.
    pub fn initial_mu(&self, phi0: &Field, sigma0: &Field) -> Field {
        let grid = *self.grid();
        let mut lap = vec![0.0; grid.len()];
        laplacian_into(&grid, phi0.values(), &mut lap);
        let pot = &self.model.potential;
        let vals = (0..grid.len())
            .map(|k| -lap[k] + pot.eval_clamped(phi0.values()[k], 1).0 - sigma0.values()[k])
            .collect();
        Field::from_values(&grid, vals).expect("grid sized")
    }

    /// Advances one step; `index` is the step number `n` (for diagnostics).
    pub fn step(&self, prev: &StateTriple, u: &Field, index: usize) -> Result<(StateTriple, StepStats)> {
        let grid = *self.grid();
        grid.check_same(prev.phi.grid())?;
        grid.check_same(u.grid())?;
        let p = &self.model.params;
        let dt = p.dt();
        let (k, a0) = (1.0 / dt + p.m, p.tau / dt);
        let gamma: &GammaSource = &self.model.gamma;
        let phi = prev.phi.values();
        let sigma = prev.sigma.values();
        let n = grid.len();

        let mu_data: Vec<f64> = (0..n).map(|i| -(a0 + 2.0 * p.c0) * phi[i] - sigma[i]).collect();
        let rhs: Vec<f64> = (0..n).map(|i| phi[i] / dt + gamma.value(phi[i], sigma[i])).collect();
        let d0: Vec<f64> = phi.iter().map(|&s| convex_curvature(s)).collect();
        let mut problem = PhaseProblem {
            op: PhaseOperator::new(&self.spectrum, k, a0, &d0),
            grid,
            k,
            a0,
            phi_old: phi,
            mu_data,
            rhs,
            tol: p.cg_tol,
            max_iter: p.cg_max_iter,
        };
        let mut settings = NewtonSettings::new(p.newton_tol, p.newton_max_iter);
        settings.step_index = index;
        let (phi_new, newton) = newton_safeguarded(&mut problem, prev.phi.clone(), &settings)?;
        debug_assert_eq!(problem.phi_old.len(), n);
        let max_abs = phi_new.norm_inf();
        if !(max_abs <= 1.0 - S_GUARD) {
            return Err(Error::SeparationViolation {
                step: index + 1,
                max_abs,
            });
        }
        let mu_new = Field::from_values(&grid, problem.mu(phi_new.values()))?;
        let clamp_events = phi_new.values().iter().filter(|v| v.abs() >= 1.0 - S_GUARD).count();

        // nutrient substep
        let nutrient = NutrientOperator::new(&self.spectrum, dt, sigma);
        if !(nutrient.min_diagonal() > 0.0) {
            return Err(Error::NutrientIndefinite {
                step: index + 1,
                min_diagonal: nutrient.min_diagonal(),
            });
        }
        let mut div = vec![0.0; n];
        chemotaxis_div_into(&grid, sigma, phi_new.values(), &mut div);
        let uv = u.values();
        let b: Vec<f64> = (0..n).map(|i| sigma[i] / dt - div[i] + uv[i]).collect();
        let mut sigma_new = sigma.to_vec();
        let cg = nutrient.solve(&b, &mut sigma_new, p.cg_tol, p.cg_max_iter)?;
        let sigma_new = Field::from_values(&grid, sigma_new)?;
        if !sigma_new.is_finite() || !mu_new.is_finite() {
            return Err(Error::NonFinite("state step"));
        }
        let smin = sigma_new.min();
        if smin < -POSITIVITY_TOL {
            let (i, j) = sigma_new.argmin();
            if self.options.strict_positivity {
                return Err(Error::PositivityViolation {
                    step: index + 1,
                    min: smin,
                    i,
                    j,
                });
            }
            log::warn!(
                "nutrient undershoot at step {}: min sigma = {smin:.3e} at ({i}, {j})",
                index + 1
            );
        }

        Ok((
            StateTriple {
                phi: phi_new,
                mu: mu_new,
                sigma: sigma_new,
                t: prev.t + dt,
            },
            StepStats {
                newton_iters: newton.solve.iterations,
                cg_iters: newton.linear_iterations + cg.iterations,
                clamp_events,
            },
        ))
    }

    pub fn solve(&self, init: &InitialData, u: &Control) -> Result<StateTrajectory> {
        let grid = *self.grid();
        grid.check_same(init.grid())?;
        grid.check_same(u.grid())?;
        let nt = self.model.params.nt;
        if u.len() != nt {
            return Err(Error::ShapeMismatch(format!(
                "control has {} steps, expected {nt}",
                u.len()
            )));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite("control"));
        }
        if u.norm_inf() > self.options.control_cap {
            return Err(Error::InvalidParameter(format!(
                "control exceeds the cap: |u|_inf = {} > {}",
                u.norm_inf(),
                self.options.control_cap
            )));
        }
        let bytes = 3 * 8 * grid.len() as u64 * (nt as u64 + 1);
        if bytes > MEMORY_CAP_BYTES {
            return Err(Error::MemoryCap {
                bytes,
                cap: MEMORY_CAP_BYTES,
            });
        }

        let first = StateTriple {
            phi: init.phi0().clone(),
            mu: self.initial_mu(init.phi0(), init.sigma0()),
            sigma: init.sigma0().clone(),
            t: 0.0,
        };
        let pot = &self.model.potential;
        let mut monitors = vec![StepMonitor::observe(0, &first, pot, StepStats::default())];
        let mut steps = Vec::with_capacity(nt + 1);
        steps.push(first);
        for n in 0..nt {
            let (next, stats) = self.step(&steps[n], u.get(n), n)?;
            monitors.push(StepMonitor::observe(n + 1, &next, pot, stats));
            steps.push(next);
        }
        Ok(StateTrajectory {
            steps,
            model: self.model,
            control_hash: u.checksum(),
            monitors,
        })
    }
}

pub fn step_state(prev: &StateTriple, u_n: &Field, model: &Model) -> Result<StateTriple> {
    Stepper::new(prev.phi.grid(), *model, SolverOptions::default())
        .step(prev, u_n, 0)
        .map(|(s, _)| s)
}

pub fn solve_state(init: &InitialData, u: &Control, model: &Model, options: SolverOptions) -> Result<StateTrajectory> {
    Stepper::new(init.grid(), *model, options).solve(init, u)
}
