//! Proliferation function `gamma(phi, sigma)`.
//!
//! The family shipped here is `a * tanh(k_phi * phi + k_sigma * sigma + k_0)`,
//! which is smooth, bounded by `a`, and has derivatives bounded by
//! `a * max(|k_phi|, |k_sigma|)` (first) and `2 a * k^2 / (3 sqrt 3)` (second).
//! The default uses `k_phi = -1, k_sigma = 1, k_0 = 0`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaKind {
    TanhDefault,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaOrder {
    Value,
    DPhi,
    DSigma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSource {
    kind: GammaKind,
    amplitude: f64,
    coef_phi: f64,
    coef_sigma: f64,
    offset: f64,
}

impl GammaSource {
    /// `a * tanh(sigma - phi)`.
    pub fn tanh_default(amplitude: f64) -> Result<Self> {
        Self::build(GammaKind::TanhDefault, amplitude, -1.0, 1.0, 0.0)
    }

    /// `a * tanh(coef_phi * phi + coef_sigma * sigma + offset)`.
    pub fn custom(amplitude: f64, coef_phi: f64, coef_sigma: f64, offset: f64) -> Result<Self> {
        Self::build(GammaKind::Custom, amplitude, coef_phi, coef_sigma, offset)
    }

    /// The zero source.
    pub fn zero() -> Self {
        Self {
            kind: GammaKind::TanhDefault,
            amplitude: 0.0,
            coef_phi: -1.0,
            coef_sigma: 1.0,
            offset: 0.0,
        }
    }

    fn build(kind: GammaKind, amplitude: f64, coef_phi: f64, coef_sigma: f64, offset: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma amplitude must be finite and nonnegative, got {amplitude}"
            )));
        }
        if ![coef_phi, coef_sigma, offset].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("gamma coefficients must be finite".into()));
        }
        Ok(Self {
            kind,
            amplitude,
            coef_phi,
            coef_sigma,
            offset,
        })
    }

    /// Checks `sup |gamma| < m`.
    pub fn validate_against_mass(&self, m: f64) -> Result<()> {
        if self.sup_abs() < m {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "gamma amplitude {} must stay below the mass coefficient m = {m}",
                self.amplitude
            )))
        }
    }

    pub fn kind(&self) -> GammaKind {
        self.kind
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn coef_phi(&self) -> f64 {
        self.coef_phi
    }
    pub fn coef_sigma(&self) -> f64 {
        self.coef_sigma
    }
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn sup_abs(&self) -> f64 {
        self.amplitude
    }

    /// Bound on the first partial derivatives.
    pub fn derivative_bound(&self) -> f64 {
        self.amplitude * self.coef_phi.abs().max(self.coef_sigma.abs())
    }

    #[inline]
    fn arg(&self, phi: f64, sigma: f64) -> f64 {
        self.coef_phi * phi + self.coef_sigma * sigma + self.offset
    }

    #[inline]
    pub fn value(&self, phi: f64, sigma: f64) -> f64 {
        self.amplitude * self.arg(phi, sigma).tanh()
    }

    #[inline]
    fn sech2(&self, phi: f64, sigma: f64) -> f64 {
        let t = self.arg(phi, sigma).tanh();
        1.0 - t * t
    }

    #[inline]
    pub fn d_phi(&self, phi: f64, sigma: f64) -> f64 {
        self.amplitude * self.coef_phi * self.sech2(phi, sigma)
    }

    #[inline]
    pub fn d_sigma(&self, phi: f64, sigma: f64) -> f64 {
        self.amplitude * self.coef_sigma * self.sech2(phi, sigma)
    }

    pub fn eval(&self, phi: f64, sigma: f64, order: GammaOrder) -> f64 {
        match order {
            GammaOrder::Value => self.value(phi, sigma),
            GammaOrder::DPhi => self.d_phi(phi, sigma),
            GammaOrder::DSigma => self.d_sigma(phi, sigma),
        }
    }
}

pub fn gamma_eval(g: &GammaSource, phi: f64, sigma: f64, order: GammaOrder) -> f64 {
    g.eval(phi, sigma, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_values() {
        let g = GammaSource::tanh_default(0.5).unwrap();
        assert_eq!(gamma_eval(&g, 0.0, 0.0, GammaOrder::Value), 0.0);
        assert!((gamma_eval(&g, 0.0, 0.0, GammaOrder::DSigma) - 0.5).abs() < 1e-15);
        assert!((gamma_eval(&g, 1.0, 1.0, GammaOrder::DPhi) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn amplitude_must_stay_below_mass() {
        let g = GammaSource::tanh_default(0.5).unwrap();
        assert!(g.validate_against_mass(1.0).is_ok());
        assert!(g.validate_against_mass(0.5).is_err());
        assert!(GammaSource::tanh_default(-0.1).is_err());
        assert!(GammaSource::custom(0.2, f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn bounded_on_random_samples() {
        let g = GammaSource::tanh_default(0.5).unwrap();
        let m = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let phi: f64 = rng.gen_range(-50.0..50.0);
            let sigma: f64 = rng.gen_range(-50.0..50.0);
            assert!(g.value(phi, sigma).abs() <= 0.5 && 0.5 < m);
            assert!(g.d_phi(phi, sigma).abs() <= 0.5);
            assert!(g.d_sigma(phi, sigma).abs() <= 0.5);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let g = GammaSource::custom(0.3, 0.7, -1.2, 0.1).unwrap();
        let h = 1e-6;
        for &(p, s) in &[(0.1, 0.4), (-0.8, 1.5), (0.5, -0.2)] {
            let dp = (g.value(p + h, s) - g.value(p - h, s)) / (2.0 * h);
            let ds = (g.value(p, s + h) - g.value(p, s - h)) / (2.0 * h);
            assert!((dp - g.d_phi(p, s)).abs() < 1e-9);
            assert!((ds - g.d_sigma(p, s)).abs() < 1e-9);
        }
    }
}
