use crate::error::{Error, Result};
use crate::gamma::GammaSource;
use crate::potential::LogPotential;

/// Physical and numerical parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Viscosity coefficient.
    pub tau: f64,
    /// Mass (decay) coefficient in the phase equation.
    pub m: f64,
    /// Concavity constant of the potential.
    pub c0: f64,
    /// Final time.
    pub t_final: f64,
    /// Number of time steps.
    pub nt: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            tau: 0.1,
            m: 1.0,
            c0: 1.5,
            t_final: 1.0,
            nt: 200,
            newton_tol: 1e-12,
            newton_max_iter: 40,
            cg_tol: 1e-12,
            cg_max_iter: 2000,
        }
    }
}

impl ModelParams {
    pub fn dt(&self) -> f64 {
        if self.nt == 0 {
            0.0
        } else {
            self.t_final / self.nt as f64
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("tau", self.tau)?;
        positive("m", self.m)?;
        positive("T", self.t_final)?;
        positive("newton_tol", self.newton_tol)?;
        positive("cg_tol", self.cg_tol)?;
        if !(self.c0 > 1.0 && self.c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 must exceed 1, got {}", self.c0)));
        }
        if self.newton_max_iter == 0 || self.cg_max_iter == 0 {
            return Err(Error::InvalidParameter("iteration caps must be at least 1".into()));
        }
        // The semi-implicit logistic term needs 1/dt - 1 > 0 for the nutrient
        // operator to stay positive definite.
        if self.nt > 0 && self.dt() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "time step dt = {} must be below 1",
                self.dt()
            )));
        }
        Ok(())
    }
}

/// Parameters together with the validated nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub potential: LogPotential,
    pub gamma: GammaSource,
}

impl Model {
    pub fn new(params: ModelParams, gamma: GammaSource) -> Result<Self> {
        params.validate()?;
        gamma.validate_against_mass(params.m)?;
        Ok(Self {
            params,
            potential: LogPotential::new(params.c0)?,
            gamma,
        })
    }

    /// Same model with a different number of time steps.
    pub fn with_steps(&self, nt: usize) -> Result<Self> {
        let mut params = self.params;
        params.nt = nt;
        Self::new(params, self.gamma)
    }
}
