//! Numerical self-checks. Each returns the measured quantity, the threshold
//! it is held to and whether it passes.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{cost_eval, reduced_gradient, ControlProblem};
use crate::error::Result;
use crate::field_seq::{Control, FieldSeq};
use crate::gamma::GammaSource;
use crate::grid::{Field, Grid2D};
use crate::operators::stencil::{h1_norm, laplacian_neumann};
use crate::params::{Model, ModelParams};
use crate::sensitivity::{adjoint_step_map, solve_adjoint, solve_tangent, tangent_step_map, FrozenCoefficients};
use crate::state::{mass_balance_report, InitialData, SolverOptions, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    /// `true` when the measured value must stay below the threshold.
    pub upper: bool,
}

impl CheckOutcome {
    fn below(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            upper: true,
        }
    }

    fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            upper: false,
        }
    }

    pub fn pass(&self) -> bool {
        if self.upper {
            self.measured <= self.threshold
        } else {
            self.measured >= self.threshold
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<40} {:>12.3e} {} {:>10.3e}  {}",
            self.name,
            self.measured,
            if self.upper { "<=" } else { ">=" },
            self.threshold,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

/// Everything a check needs: model, initial data, a base control and a cost.
#[derive(Debug, Clone)]
pub struct CheckSetup {
    pub model: Model,
    pub init: InitialData,
    pub control: Control,
    pub problem: ControlProblem,
    pub options: SolverOptions,
}

impl CheckSetup {
    pub fn grid(&self) -> &Grid2D {
        self.init.grid()
    }

    pub fn nt(&self) -> usize {
        self.model.params.nt
    }

    fn stepper(&self) -> Stepper {
        Stepper::new(self.grid(), self.model, self.options)
    }
}

pub fn random_control(grid: &Grid2D, nt: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> Control {
    let fields = (0..nt)
        .map(|_| {
            let v = (0..grid.len()).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
            Field::from_values(grid, v).expect("sized to the grid")
        })
        .collect();
    FieldSeq::new(grid, fields).expect("same grid")
}

/// `<g, h>_Q` against central differences of the reduced cost, minimum
/// relative error over `eps`.
pub fn check_gradient(s: &CheckSetup, eps: &[f64], seed: u64) -> Result<CheckOutcome> {
    let stepper = s.stepper();
    let traj = stepper.solve(&s.init, &s.control)?;
    let adj = solve_adjoint(&traj, &s.problem)?;
    let grad = reduced_gradient(&s.control, &adj, &s.problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_control(s.grid(), s.nt(), 1.0, &mut rng);
    let exact = grad.q_inner(&h, traj.dt())?;
    let j = |e: f64| -> Result<f64> {
        let mut v = s.control.clone();
        v.axpy(e, &h)?;
        Ok(cost_eval(&stepper.solve(&s.init, &v)?, &v, &s.problem)?.total)
    };
    let mut best = f64::INFINITY;
    for &e in eps {
        let fd = (j(e)? - j(-e)?) / (2.0 * e);
        let rel = (fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        log::info!("gradient check eps = {e:e}: fd = {fd:.15e}, adjoint = {exact:.15e}, rel = {rel:.3e}");
        best = best.min(rel);
    }
    Ok(CheckOutcome::below("gradient vs central differences", best, 1e-8))
}

/// Two-sided duality identity over `directions` random `h`, worst relative
/// error.
pub fn check_duality(s: &CheckSetup, directions: usize, seed: u64) -> Result<CheckOutcome> {
    let traj = s.stepper().solve(&s.init, &s.control)?;
    let adj = solve_adjoint(&traj, &s.problem)?;
    let r = adj.r_seq();
    let dt = traj.dt();
    let nt = traj.nt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let h = random_control(s.grid(), nt, 1.0, &mut rng);
        let tan = solve_tangent(&s.control, &h, &traj)?;
        let lhs = r.q_inner(&h, dt)?;
        let mut rhs = 0.0;
        for n in 0..nt {
            rhs += dt * s.problem.g1(&traj, n).inner(&tan.steps[n].psi)?;
            rhs += dt * s.problem.g2(&traj, n).inner(&tan.steps[n].zeta)?;
        }
        rhs += s.problem.g3(&traj).inner(&tan.steps[nt].psi)?;
        rhs += s.problem.g4(&traj).inner(&tan.steps[nt].zeta)?;
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    Ok(CheckOutcome::below("duality identity", worst, 1e-10))
}

/// `|<T x, y> - <x, T* y>| / (|x| |y|)` for every step, worst case.
pub fn check_transpose(s: &CheckSetup, seed: u64) -> Result<CheckOutcome> {
    let traj = s.stepper().solve(&s.init, &s.control)?;
    let g = *s.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_field =
        || Field::from_values(&g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized");
    let mut worst = 0.0f64;
    for n in 0..traj.nt() {
        let c = FrozenCoefficients::at(&traj, n);
        let (psi, zeta, h, p, r) = (rand_field(), rand_field(), rand_field(), rand_field(), rand_field());
        let (psi1, _, zeta1) = tangent_step_map(&c, &s.model, &psi, &zeta, &h)?;
        let (a, b, e) = adjoint_step_map(&c, &s.model, &p, &r)?;
        let lhs = psi1.inner(&p)? + zeta1.inner(&r)?;
        let rhs = psi.inner(&a)? + zeta.inner(&b)? + h.inner(&e)?;
        let nx = (psi.norm().powi(2) + zeta.norm().powi(2) + h.norm().powi(2)).sqrt();
        let ny = (p.norm().powi(2) + r.norm().powi(2)).sqrt();
        worst = worst.max((lhs - rhs).abs() / (nx * ny));
    }
    Ok(CheckOutcome::below("step transpose identity", worst, 1e-11))
}

pub fn check_mass(s: &CheckSetup) -> Result<CheckOutcome> {
    let traj = s.stepper().solve(&s.init, &s.control)?;
    let worst = mass_balance_report(&traj, &s.control)?
        .iter()
        .map(|r| r.worst_relative())
        .fold(0.0, f64::max);
    Ok(CheckOutcome::below("mass balance residual", worst, 1e-10))
}

/// Relative error of the tangent trajectory against central differences of
/// the state map, in the discrete `L2(0,T; L2)` norm of `(psi, zeta)`.
pub fn check_tangent(s: &CheckSetup, eps: f64, seed: u64) -> Result<CheckOutcome> {
    let stepper = s.stepper();
    let traj = stepper.solve(&s.init, &s.control)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_control(s.grid(), s.nt(), 1.0, &mut rng);
    let tan = solve_tangent(&s.control, &h, &traj)?;
    let mut up = s.control.clone();
    up.axpy(eps, &h)?;
    let mut um = s.control.clone();
    um.axpy(-eps, &h)?;
    let tp = stepper.solve(&s.init, &up)?;
    let tm = stepper.solve(&s.init, &um)?;
    let (mut num, mut den) = (0.0, 0.0);
    for n in 0..=traj.nt() {
        let t = &tan.steps[n];
        let fd_phi = tp.step(n).phi.sub(&tm.step(n).phi)?.scaled(0.5 / eps);
        let fd_sigma = tp.step(n).sigma.sub(&tm.step(n).sigma)?.scaled(0.5 / eps);
        num += fd_phi.sub(&t.psi)?.norm().powi(2) + fd_sigma.sub(&t.zeta)?.norm().powi(2);
        den += t.psi.norm().powi(2) + t.zeta.norm().powi(2);
    }
    Ok(CheckOutcome::below(
        "tangent vs central differences",
        (num / den).sqrt(),
        1e-5,
    ))
}

/// Continuous dependence ratios over `pairs` random control pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceReport {
    pub ratios: Vec<f64>,
}

impl DependenceReport {
    pub fn max(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.ratios.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn spread(&self) -> f64 {
        self.max() / self.min()
    }

    pub fn outcome(&self) -> CheckOutcome {
        let finite = self.ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        let spread = if finite { self.spread() } else { f64::INFINITY };
        CheckOutcome::below("continuous dependence ratio spread", spread, 10.0)
    }
}

/// `(max_n |phi1 - phi2|_H1 + max_n |sigma1 - sigma2|) / |u1 - u2|_Q`.
pub fn continuous_dependence(s: &CheckSetup, pairs: usize, bound: f64, seed: u64) -> Result<DependenceReport> {
    let stepper = s.stepper();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = s.model.params.dt();
    let mut ratios = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let u1 = random_control(s.grid(), s.nt(), bound, &mut rng);
        let u2 = random_control(s.grid(), s.nt(), bound, &mut rng);
        let a = stepper.solve(&s.init, &u1)?;
        let b = stepper.solve(&s.init, &u2)?;
        let mut dphi = 0.0f64;
        let mut dsig = 0.0f64;
        for (x, y) in a.steps().iter().zip(b.steps()) {
            dphi = dphi.max(h1_norm(&x.phi.sub(&y.phi)?));
            dsig = dsig.max(x.sigma.sub(&y.sigma)?.norm());
        }
        let du = u1.zip_map(&u2, |p, q| p - q)?.q_norm(dt);
        ratios.push((dphi + dsig) / du);
    }
    Ok(DependenceReport { ratios })
}

/// `sigma(1)` of the uniform logistic run with `nt` steps on an `n x n` grid,
/// and its distance to `1 / (1 + e^{-1})`.
pub fn logistic_error(n: usize, nt: usize) -> Result<f64> {
    let g = Grid2D::unit_square(n)?;
    let params = ModelParams {
        nt,
        t_final: 1.0,
        ..ModelParams::default()
    };
    let model = Model::new(params, GammaSource::tanh_default(0.0)?)?;
    let init = InitialData::new(Field::zeros(&g), Field::constant(&g, 0.5), 1e-9)?;
    let traj = Stepper::new(&g, model, SolverOptions::default()).solve(&init, &FieldSeq::zeros(&g, nt))?;
    let exact = 1.0 / (1.0 + (-1.0f64).exp());
    Ok(traj
        .last()
        .sigma
        .values()
        .iter()
        .map(|s| (s - exact).abs())
        .fold(0.0, f64::max))
}

/// Logistic error at `dt` and the ratio of errors at `dt` and `dt / 2`.
pub fn check_logistic(n: usize, nt: usize) -> Result<(CheckOutcome, CheckOutcome)> {
    let e1 = logistic_error(n, nt)?;
    let e2 = logistic_error(n, 2 * nt)?;
    Ok((
        CheckOutcome::below("logistic error at t = 1", e1, 2e-3),
        CheckOutcome::above("logistic error ratio under dt / 2", e1 / e2, 1.9),
    ))
}

/// Max-norm error of the Laplacian on `cos(pi x) cos(pi y)` for each grid.
pub fn laplacian_errors(sizes: &[usize]) -> Result<Vec<(f64, f64)>> {
    sizes
        .iter()
        .map(|&n| {
            let g = Grid2D::unit_square(n)?;
            let f = Field::from_fn(&g, |x, y| (PI * x).cos() * (PI * y).cos());
            let err = laplacian_neumann(&f).sub(&f.scaled(-2.0 * PI * PI))?.norm_inf();
            Ok((g.hx(), err))
        })
        .collect()
}

/// Smallest observed order over consecutive refinements.
pub fn check_laplacian_order(sizes: &[usize]) -> Result<CheckOutcome> {
    let errs = laplacian_errors(sizes)?;
    let order = errs
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .fold(f64::INFINITY, f64::min);
    Ok(CheckOutcome::above("Laplacian observed order", order, 1.8))
}

/// Temporal and spatial convergence checks.
pub fn check_convergence() -> Result<Vec<CheckOutcome>> {
    let (err, ratio) = check_logistic(16, 1000)?;
    Ok(vec![err, ratio, check_laplacian_order(&[17, 33, 65])?])
}
