//! Linear operators of one time step, shared by the forward, tangent and
//! adjoint solvers.
//!
//! With `N = -Delta_h`, `k = 1/dt + m`, `a0 = tau/dt` and a diagonal
//! curvature field `d`, the phase substep Jacobian is
//!
//! ```text
//! J = k I + N A,    A = a0 I + N + diag(d).
//! ```
//!
//! `J` is not self-adjoint, but `A J = k A + A N A =: P` is, and it is
//! positive definite. Both `J x = b` (as `P x = A b`) and `J^T p = c`
//! (as `P y = c`, `p = A y`) therefore reduce to CG on `P`, preconditioned
//! by the same operator with `d` replaced by a constant.
//!
//! The nutrient substep operator is `B = diag(c) + N` with `c > 0`.

use crate::error::Result;
use crate::grid::Grid2D;
use crate::operators::cg::{
    pcg, LinearOperator, Preconditioner, ShiftedLaplacianPreconditioner, SolveReport, StopRule,
};
use crate::operators::spectral::NeumannSpectrum;
use crate::operators::stencil::neg_laplacian_into;

pub(crate) struct PhaseOperator<'a> {
    spectrum: &'a NeumannSpectrum,
    k: f64,
    a0: f64,
    d: &'a [f64],
    d_ref: f64,
}

impl<'a> PhaseOperator<'a> {
    pub fn new(spectrum: &'a NeumannSpectrum, k: f64, a0: f64, d: &'a [f64]) -> Self {
        let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        Self {
            spectrum,
            k,
            a0,
            d,
            d_ref: 0.5 * (lo + hi),
        }
    }

    fn grid(&self) -> &Grid2D {
        self.spectrum.grid()
    }

    pub fn spectrum(&self) -> &'a NeumannSpectrum {
        self.spectrum
    }

    /// `out = A x`
    pub fn apply_a(&self, x: &[f64], out: &mut [f64]) {
        neg_laplacian_into(self.grid(), x, out);
        for ((o, &xv), &dv) in out.iter_mut().zip(x).zip(self.d) {
            *o += (self.a0 + dv) * xv;
        }
    }

    /// `out = J x = k x + N A x`
    #[cfg(test)]
    pub fn apply_j(&self, x: &[f64], out: &mut [f64]) {
        let mut t = vec![0.0; x.len()];
        self.apply_a(x, &mut t);
        neg_laplacian_into(self.grid(), &t, out);
        for (o, &xv) in out.iter_mut().zip(x) {
            *o += self.k * xv;
        }
    }

    /// `out = J^T x = k x + A N x`
    #[cfg(test)]
    pub fn apply_jt(&self, x: &[f64], out: &mut [f64]) {
        let mut t = vec![0.0; x.len()];
        neg_laplacian_into(self.grid(), x, &mut t);
        self.apply_a(&t, out);
        for (o, &xv) in out.iter_mut().zip(x) {
            *o += self.k * xv;
        }
    }

    /// Inverse of the constant-coefficient approximation of `J`, used to
    /// measure Newton residuals in solution units.
    pub fn apply_jref_inv(&self, r: &mut [f64]) {
        let (k, a) = (self.k, self.a0 + self.d_ref);
        self.spectrum.apply_symbol(r, |nu| 1.0 / (k + nu * (a + nu)));
    }

    fn p_solve(&self, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> SolveReport {
        let op = SchurOperator { inner: self };
        let pre = SchurPreconditioner { inner: self };
        pcg(&op, Some(&pre), rhs, x, tol, max_iter, StopRule::Preconditioned)
    }

    /// Solves `J x = b`.
    pub fn solve_j(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
        let mut ab = vec![0.0; b.len()];
        self.apply_a(b, &mut ab);
        let mut x = vec![0.0; b.len()];
        let rep = self.p_solve(&ab, &mut x, tol, max_iter).into_result("phase substep")?;
        Ok((x, rep))
    }

    /// Solves `J^T p = c`.
    pub fn solve_jt(&self, c: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
        let mut y = vec![0.0; c.len()];
        let rep = self
            .p_solve(c, &mut y, tol, max_iter)
            .into_result("adjoint phase substep")?;
        let mut p = vec![0.0; c.len()];
        self.apply_a(&y, &mut p);
        Ok((p, rep))
    }
}

struct SchurOperator<'a, 'b> {
    inner: &'b PhaseOperator<'a>,
}

impl LinearOperator for SchurOperator<'_, '_> {
    fn grid(&self) -> &Grid2D {
        self.inner.grid()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut ax = vec![0.0; n];
        let mut nax = vec![0.0; n];
        self.inner.apply_a(x, &mut ax);
        neg_laplacian_into(self.grid(), &ax, &mut nax);
        self.inner.apply_a(&nax, out);
        for (o, &v) in out.iter_mut().zip(&ax) {
            *o += self.inner.k * v;
        }
    }
}

struct SchurPreconditioner<'a, 'b> {
    inner: &'b PhaseOperator<'a>,
}

impl Preconditioner for SchurPreconditioner<'_, '_> {
    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
        let (k, a) = (self.inner.k, self.inner.a0 + self.inner.d_ref);
        self.inner.spectrum.apply_symbol(out, |nu| {
            let an = a + nu;
            1.0 / (an * (k + nu * an))
        });
    }
}

/// `B = diag(c) + N`.
pub(crate) struct NutrientOperator<'a> {
    spectrum: &'a NeumannSpectrum,
    diag: Vec<f64>,
}

impl<'a> NutrientOperator<'a> {
    /// `c = 1/dt - 1 + sigma_n`
    pub fn new(spectrum: &'a NeumannSpectrum, dt: f64, sigma: &[f64]) -> Self {
        Self {
            spectrum,
            diag: sigma.iter().map(|s| 1.0 / dt - 1.0 + s).collect(),
        }
    }

    pub fn min_diagonal(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveReport> {
        let mean = self.diag.iter().sum::<f64>() / self.diag.len() as f64;
        let pre = ShiftedLaplacianPreconditioner::new(self.spectrum, mean, 1.0);
        pcg(self, Some(&pre), rhs, x, tol, max_iter, StopRule::Residual).into_result("nutrient substep")
    }
}

impl LinearOperator for NutrientOperator<'_> {
    fn grid(&self) -> &Grid2D {
        self.spectrum.grid()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        neg_laplacian_into(self.grid(), x, out);
        for ((o, &xv), &c) in out.iter_mut().zip(x).zip(&self.diag) {
            *o += c * xv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{weighted_dot, Field};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn phase_solves_invert_j_and_its_transpose() {
        let g = Grid2D::unit_square(17).unwrap();
        let sp = NeumannSpectrum::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(2.0..9.0)).collect();
        let op = PhaseOperator::new(&sp, 21.0, 2.0, &d);
        let b = random(g.len(), &mut rng);

        let (x, rep) = op.solve_j(&b, 1e-13, 500).unwrap();
        assert!(rep.iterations < 60, "{rep:?}");
        let mut jx = vec![0.0; g.len()];
        op.apply_j(&x, &mut jx);
        let mut err = jx.clone();
        for k in 0..g.len() {
            err[k] -= b[k];
        }
        let mut e = err.clone();
        op.apply_jref_inv(&mut e);
        let mut bb = b.clone();
        op.apply_jref_inv(&mut bb);
        assert!(weighted_dot(&g, &e, &e).sqrt() <= 1e-11 * weighted_dot(&g, &bb, &bb).sqrt());

        let (p, _) = op.solve_jt(&b, 1e-13, 500).unwrap();
        let mut jtp = vec![0.0; g.len()];
        op.apply_jt(&p, &mut jtp);
        let mut e2: Vec<f64> = jtp.iter().zip(&b).map(|(a, c)| a - c).collect();
        op.apply_jref_inv(&mut e2);
        assert!(weighted_dot(&g, &e2, &e2).sqrt() <= 1e-11 * weighted_dot(&g, &bb, &bb).sqrt());
    }

    #[test]
    fn j_transpose_is_the_weighted_adjoint() {
        let g = Grid2D::new(9, 7, 1.0, 0.8).unwrap();
        let sp = NeumannSpectrum::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(2.0..5.0)).collect();
        let op = PhaseOperator::new(&sp, 3.0, 1.5, &d);
        let x = random(g.len(), &mut rng);
        let y = random(g.len(), &mut rng);
        let mut jx = vec![0.0; g.len()];
        let mut jty = vec![0.0; g.len()];
        op.apply_j(&x, &mut jx);
        op.apply_jt(&y, &mut jty);
        let lhs = weighted_dot(&g, &jx, &y);
        let rhs = weighted_dot(&g, &x, &jty);
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
    }

    #[test]
    fn nutrient_solve() {
        let g = Grid2D::unit_square(20).unwrap();
        let sp = NeumannSpectrum::new(&g);
        let sigma = Field::from_fn(&g, |x, y| 0.5 + 0.4 * (3.0 * x * y).sin());
        let op = NutrientOperator::new(&sp, 0.01, sigma.values());
        let b = Field::from_fn(&g, |x, _| x).into_values();
        let mut x = vec![0.0; g.len()];
        let rep = op.solve(&b, &mut x, 1e-13, 500).unwrap();
        assert!(rep.iterations < 20);
        let mut bx = vec![0.0; g.len()];
        op.apply(&x, &mut bx);
        let r: f64 = bx.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-13 * bn * 1.0001);
    }
}
