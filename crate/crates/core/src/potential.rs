//! The logarithmic (Flory-Huggins) double-well potential
//! `F(s) = (1+s) ln(1+s) + (1-s) ln(1-s) - c0 s^2` on `[-1, 1]`.

use crate::error::{Error, Result};

/// Distance from `+-1` that guarded evaluations keep.
pub const S_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPotential {
    c0: f64,
}

/// `x ln x` with `0 ln 0 = 0`.
#[inline]
pub(crate) fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl LogPotential {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 1.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "potential constant c0 must exceed 1, got {c0}"
            )));
        }
        Ok(Self { c0 })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Strict evaluation of `F^(order)(s)`; `|s| >= 1` is a domain error.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if !(s.abs() < 1.0) {
            return Err(Error::PotentialDomain { value: s });
        }
        Ok(self.eval_unchecked(s, order))
    }

    /// Evaluation after clamping `s` into `[-1 + S_GUARD, 1 - S_GUARD]`.
    /// The flag reports whether clamping happened.
    pub fn eval_clamped(&self, s: f64, order: u8) -> (f64, bool) {
        let bound = 1.0 - S_GUARD;
        let clamped = s.clamp(-bound, bound);
        (self.eval_unchecked(clamped, order), clamped != s)
    }

    /// Value of `F` extended by continuity to the closed interval `[-1, 1]`.
    pub fn value_closed(&self, s: f64) -> Result<f64> {
        if !(s.abs() <= 1.0) {
            return Err(Error::PotentialDomain { value: s });
        }
        Ok(xlnx(1.0 + s) + xlnx(1.0 - s) - self.c0 * s * s)
    }

    fn eval_unchecked(&self, s: f64, order: u8) -> f64 {
        match order {
            0 => xlnx(1.0 + s) + xlnx(1.0 - s) - self.c0 * s * s,
            1 => convex_derivative(s) - 2.0 * self.c0 * s,
            2 => convex_curvature(s) - 2.0 * self.c0,
            3 => {
                let d = 1.0 - s * s;
                4.0 * s / (d * d)
            }
            _ => panic!("potential derivative order {order} not supported (0..=3)"),
        }
    }
}

/// Derivative of the convex part, `ln((1+s)/(1-s))`.
#[inline]
pub fn convex_derivative(s: f64) -> f64 {
    2.0 * s.atanh()
}

/// Second derivative of the convex part, `2 / (1 - s^2)`.
#[inline]
pub fn convex_curvature(s: f64) -> f64 {
    2.0 / (1.0 - s * s)
}

/// Potential evaluation entry point; `strict = false` clamps instead of failing.
pub fn potential_eval(pot: &LogPotential, s: f64, order: u8, strict: bool) -> Result<f64> {
    if strict {
        pot.eval(s, order)
    } else {
        Ok(pot.eval_clamped(s, order).0)
    }
}
