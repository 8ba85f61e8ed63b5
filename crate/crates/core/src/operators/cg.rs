//! Matrix-free (preconditioned) conjugate gradients.
//!
//! All operators in this crate are self-adjoint in the trapezoid inner
//! product rather than the Euclidean one (boundary rows of the mirror
//! stencil are not symmetric), so CG runs in the weighted inner product.

use crate::error::{Error, Result};
use crate::grid::{weighted_dot, Field, Grid2D};
use crate::operators::spectral::NeumannSpectrum;
use crate::operators::stencil::neg_laplacian_into;

pub trait LinearOperator {
    fn grid(&self) -> &Grid2D;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

pub trait Preconditioner {
    fn precondition(&self, r: &[f64], out: &mut [f64]);
}

/// Norm in which convergence is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// `|b - A x|_2 <= tol |b|_2`
    Residual,
    /// `|M^{-1}(b - A x)| <= tol |M^{-1} b|` in the weighted norm. Used for
    /// fourth-order operators, where the plain residual is dominated by
    /// round-off in the highest modes.
    Preconditioned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual in the norm of the stop rule.
    pub final_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn into_result(self, context: &'static str) -> Result<SolveReport> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::LinearNonConvergence {
                context,
                iterations: self.iterations,
                residual: self.final_residual,
            })
        }
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A solve whose true residual stalls above `tol` because of round-off is
/// still accepted if it is within this factor of `tol`.
pub const STAGNATION_SLACK: f64 = 1e3;

/// Solves `A x = b` in place, starting from the incoming `x`.
pub fn pcg(
    op: &dyn LinearOperator,
    precond: Option<&dyn Preconditioner>,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    rule: StopRule,
) -> SolveReport {
    let grid = *op.grid();
    let n = grid.len();
    let dot = |a: &[f64], b: &[f64]| weighted_dot(&grid, a, b);
    let apply_m = |r: &[f64], z: &mut [f64]| match precond {
        Some(m) => m.precondition(r, z),
        None => z.copy_from_slice(r),
    };

    let mut z = vec![0.0; n];
    let rhs_norm = match rule {
        StopRule::Residual => euclid(rhs),
        StopRule::Preconditioned => {
            apply_m(rhs, &mut z);
            dot(&z, &z).sqrt()
        }
    };
    if rhs_norm == 0.0 {
        x.fill(0.0);
        return SolveReport {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        };
    }

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        op.apply(x, scratch);
        for k in 0..n {
            r[k] = rhs[k] - scratch[k];
        }
    };
    residual(x, &mut r, &mut ap);
    apply_m(&r, &mut z);
    let measure = |r: &[f64], z: &[f64]| match rule {
        StopRule::Residual => euclid(r) / rhs_norm,
        StopRule::Preconditioned => dot(z, z).sqrt() / rhs_norm,
    };

    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = measure(&r, &z);
    let mut iterations = 0;
    let mut last_confirmed = f64::INFINITY;
    let mut stagnated = false;
    let (mut best_replaced, mut stalls) = (f64::INFINITY, 0);
    while iterations < max_iter {
        if rel <= tol {
            // confirm against the true residual before stopping
            residual(x, &mut r, &mut ap);
            apply_m(&r, &mut z);
            rel = measure(&r, &z);
            if rel <= tol {
                break;
            }
            // the recurrence has drifted below the attainable accuracy
            if rel >= 0.5 * last_confirmed {
                stagnated = true;
                break;
            }
            last_confirmed = rel;
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        let replaced = iterations % 50 == 0;
        if replaced {
            residual(x, &mut r, &mut ap);
        }
        apply_m(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rel = measure(&r, &z);
        if replaced {
            if rel < 0.9 * best_replaced {
                best_replaced = rel;
                stalls = 0;
            } else {
                stalls += 1;
                if stalls >= 3 {
                    stagnated = true;
                    break;
                }
            }
        }
    }
    if rel <= tol && iterations == max_iter {
        residual(x, &mut r, &mut ap);
        apply_m(&r, &mut z);
        rel = measure(&r, &z);
    }
    SolveReport {
        iterations,
        final_residual: rel,
        converged: rel <= tol || (stagnated && rel <= STAGNATION_SLACK * tol),
    }
}

/// `c_id * I + c_lap * (-Delta_h) + c_diag * diag(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOpSpec {
    grid: Grid2D,
    pub c_id: f64,
    pub c_lap: f64,
    pub c_diag: f64,
    pub weight: Option<Field>,
}

impl LinOpSpec {
    pub fn new(grid: &Grid2D, c_id: f64, c_lap: f64) -> Self {
        Self {
            grid: *grid,
            c_id,
            c_lap,
            c_diag: 0.0,
            weight: None,
        }
    }

    pub fn with_diagonal(mut self, c_diag: f64, weight: Field) -> Result<Self> {
        self.grid.check_same(weight.grid())?;
        self.c_diag = c_diag;
        self.weight = Some(weight);
        Ok(self)
    }

    /// Sufficient condition for positive definiteness.
    pub fn is_positive_definite(&self) -> bool {
        let diag_min = match &self.weight {
            Some(w) => (self.c_diag * w.min()).min(self.c_diag * w.max()),
            None => 0.0,
        };
        self.c_id + diag_min > 0.0 && self.c_lap >= 0.0
    }

    /// Mean of the diagonal part, used for spectral preconditioning.
    fn mean_shift(&self) -> f64 {
        self.c_id
            + match &self.weight {
                Some(w) => self.c_diag * w.mean(),
                None => 0.0,
            }
    }

    pub fn apply_field(&self, x: &Field) -> Field {
        let mut out = Field::zeros(&self.grid);
        self.apply(x.values(), out.values_mut());
        out
    }
}

impl LinearOperator for LinOpSpec {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        if self.c_lap != 0.0 {
            neg_laplacian_into(&self.grid, x, out);
            for (o, &v) in out.iter_mut().zip(x) {
                *o = self.c_lap * *o + self.c_id * v;
            }
        } else {
            for (o, &v) in out.iter_mut().zip(x) {
                *o = self.c_id * v;
            }
        }
        if let Some(w) = &self.weight {
            for ((o, &v), &wk) in out.iter_mut().zip(x).zip(w.values()) {
                *o += self.c_diag * wk * v;
            }
        }
    }
}

/// Spectral preconditioner `(shift + c_lap * (-Delta_h))^{-1}`.
pub struct ShiftedLaplacianPreconditioner<'a> {
    spectrum: &'a NeumannSpectrum,
    shift: f64,
    c_lap: f64,
}

impl<'a> ShiftedLaplacianPreconditioner<'a> {
    pub fn new(spectrum: &'a NeumannSpectrum, shift: f64, c_lap: f64) -> Self {
        Self { spectrum, shift, c_lap }
    }
}

impl Preconditioner for ShiftedLaplacianPreconditioner<'_> {
    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
        let (s, c) = (self.shift, self.c_lap);
        self.spectrum.apply_symbol(out, |nu| 1.0 / (s + c * nu));
    }
}

fn check_spd(op: &LinOpSpec, rhs: &Field, x0: &Field) -> Result<()> {
    op.grid.check_same(rhs.grid())?;
    op.grid.check_same(x0.grid())?;
    if !op.is_positive_definite() {
        return Err(Error::InvalidParameter(format!(
            "operator {} I + {} (-Lap) + {} diag(w) is not positive definite",
            op.c_id, op.c_lap, op.c_diag
        )));
    }
    Ok(())
}

/// Unpreconditioned CG on an affine shifted-Laplacian operator.
pub fn cg_solve(op: &LinOpSpec, rhs: &Field, x0: Field, tol: f64, max_iter: usize) -> Result<(Field, SolveReport)> {
    check_spd(op, rhs, &x0)?;
    let mut x = x0;
    let report = pcg(
        op,
        None,
        rhs.values(),
        x.values_mut(),
        tol,
        max_iter,
        StopRule::Residual,
    );
    Ok((x, report))
}

/// CG with the matching constant-coefficient spectral preconditioner.
pub fn cg_solve_spectral(
    op: &LinOpSpec,
    spectrum: &NeumannSpectrum,
    rhs: &Field,
    x0: Field,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, SolveReport)> {
    check_spd(op, rhs, &x0)?;
    let pre = ShiftedLaplacianPreconditioner::new(spectrum, op.mean_shift(), op.c_lap);
    let mut x = x0;
    let report = pcg(
        op,
        Some(&pre),
        rhs.values(),
        x.values_mut(),
        tol,
        max_iter,
        StopRule::Residual,
    );
    Ok((x, report))
}
