//! Gaussian point-spread function, image-plane densities and
//! Hermite–Gaussian mode occupation.
//!
//! The field amplitude is `ψ(x) = (2πσ²)^{-1/4} exp(-x²/4σ²)`, so the
//! single-source photon density `|ψ|²` is the normal density `N(0, σ²)` and
//! the overlap of two displaced copies is `exp(-s²/8σ²)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Point-spread function of width `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPsf {
    sigma: f64,
}

impl GaussianPsf {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive and finite, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Unit-width PSF.
    pub fn unit() -> Self {
        Self { sigma: 1.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// A length expressed in units of `2σ` (the `γ = θ/2σ`, `g_s = s/2σ` scaling).
    pub fn half_width_units(&self, length: f64) -> f64 {
        length / (2.0 * self.sigma)
    }

    /// Mode-occupation parameter `τ = s²/4σ²`.
    pub fn tau(&self, s: f64) -> f64 {
        let g = self.half_width_units(s);
        g * g
    }
}

/// Relative brightness `epsilon`, separation `s` and detector offset `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub epsilon: f64,
    pub s: f64,
    pub theta: f64,
}

impl SceneParams {
    pub fn new(epsilon: f64, s: f64, theta: f64) -> Result<Self> {
        let scene = Self { epsilon, s, theta };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", format!("must lie in [0, 1], got {}", self.epsilon)));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(invalid("s", format!("must be finite and >= 0, got {}", self.s)));
        }
        if !self.theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        Ok(())
    }

    pub fn with_separation(self, s: f64) -> Self {
        Self { s, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }
}

/// Single-source image-plane density `|ψ(x)|²`.
pub fn p0_density(x: f64, psf: &GaussianPsf) -> f64 {
    ln_p0_density(x, psf).exp()
}

pub fn ln_p0_density(x: f64, psf: &GaussianPsf) -> f64 {
    let z = x / psf.sigma;
    -0.5 * z * z - psf.sigma.ln() - LN_SQRT_2PI
}

/// Two-source image-plane density `(1-ε)|ψ(x)|² + ε|ψ(x-s)|²`.
pub fn p1_density(x: f64, scene: &SceneParams, psf: &GaussianPsf) -> f64 {
    (1.0 - scene.epsilon) * p0_density(x, psf) + scene.epsilon * p0_density(x - scene.s, psf)
}

/// `ln(p1(x)/p0(x)) = ln(1 + ε(r(x) - 1))` with `r(x) = exp((2xs - s²)/2σ²)`.
pub fn ln_density_ratio(x: f64, scene: &SceneParams, psf: &GaussianPsf) -> f64 {
    let s2 = psf.sigma * psf.sigma;
    let exponent = (2.0 * x * scene.s - scene.s * scene.s) / (2.0 * s2);
    (scene.epsilon * exponent.exp_m1()).ln_1p()
}

/// Number of Hermite–Gaussian modes to keep in a sum so the Poisson tail
/// beyond it is negligible: `max(20, ceil(τ + 10√τ + 10))`.
pub fn mode_truncation(tau: f64) -> usize {
    let q = (tau + 10.0 * tau.sqrt() + 10.0).ceil();
    (q as usize).max(20)
}

/// `ln P_s(q) = q ln τ - τ - ln q!`.
pub fn ln_mode_prob(q: u64, s: f64, psf: &GaussianPsf) -> f64 {
    ln_poisson(q, psf.tau(s))
}

pub(crate) fn ln_poisson(q: u64, tau: f64) -> f64 {
    if q == 0 {
        return -tau;
    }
    if tau == 0.0 {
        return f64::NEG_INFINITY;
    }
    q as f64 * tau.ln() - tau - statrs::function::factorial::ln_factorial(q)
}

/// Probability that a photon from a source displaced by `s` occupies
/// Hermite–Gaussian mode `q`: Poisson(`τ = s²/4σ²`) mass at `q`.
pub fn mode_prob(q: u64, s: f64, psf: &GaussianPsf) -> f64 {
    ln_mode_prob(q, s, psf).exp()
}

/// `⟨ψ_0|ψ_s⟩ = exp(-s²/8σ²)`.
pub fn source_overlap(s: f64, psf: &GaussianPsf) -> f64 {
    (-0.5 * psf.tau(s)).exp()
}

/// `1 - |⟨ψ_0|ψ_s⟩|² = 1 - exp(-s²/4σ²)` without cancellation.
pub fn one_minus_overlap_sq(s: f64, psf: &GaussianPsf) -> f64 {
    -(-psf.tau(s)).exp_m1()
}

/// Probability that a photon from a source at `source_pos` is detected in the
/// fundamental mode of a demultiplexer centred at `detector_offset`.
pub fn q0_detection_prob(source_pos: f64, detector_offset: f64, psf: &GaussianPsf) -> f64 {
    let g = psf.half_width_units(detector_offset - source_pos);
    (-g * g).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> GaussianPsf {
        GaussianPsf::unit()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(GaussianPsf::new(0.0).is_err());
        assert!(GaussianPsf::new(f64::NAN).is_err());
        assert!(SceneParams::new(1.1, 0.1, 0.0).is_err());
        assert!(SceneParams::new(0.1, -0.1, 0.0).is_err());
        assert!(SceneParams::new(0.1, 0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn p0_peak_and_one_sigma() {
        assert_relative_eq!(p0_density(0.0, &unit()), 0.398_942_280_401_432_7, max_relative = 1e-15);
        let psf = GaussianPsf::new(2.5).unwrap();
        let ratio = p0_density(2.5, &psf) / p0_density(0.0, &psf);
        assert_relative_eq!(ratio, (-0.5f64).exp(), max_relative = 1e-15);
        // (2π)^{-1/2} e^{-0.245}
        assert_relative_eq!(p0_density(0.7, &unit()), 0.312_253_933_366_761, max_relative = 1e-14);
    }

    #[test]
    fn p1_null_collapse() {
        let psf = unit();
        for &x in &[-2.0, 0.0, 0.3, 1.7] {
            let a = SceneParams::new(0.0, 0.8, 0.0).unwrap();
            let b = SceneParams::new(0.4, 0.0, 0.0).unwrap();
            assert_eq!(p1_density(x, &a, &psf), p0_density(x, &psf));
            assert_relative_eq!(p1_density(x, &b, &psf), p0_density(x, &psf), max_relative = 1e-15);
        }
        let scene = SceneParams::new(0.3, 0.5, 0.0).unwrap();
        let expect = 0.7 * p0_density(0.0, &psf) + 0.3 * p0_density(0.5, &psf);
        assert_relative_eq!(p1_density(0.0, &scene, &psf), expect, max_relative = 1e-15);
    }

    #[test]
    fn ln_density_ratio_matches_direct_ratio() {
        let psf = GaussianPsf::new(1.3).unwrap();
        let scene = SceneParams::new(0.2, 0.4, 0.0).unwrap();
        for &x in &[-3.0, -0.2, 0.0, 0.9, 4.0] {
            let direct = (p1_density(x, &scene, &psf) / p0_density(x, &psf)).ln();
            assert_relative_eq!(ln_density_ratio(x, &scene, &psf), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn mode_prob_values() {
        assert_eq!(mode_prob(0, 0.0, &unit()), 1.0);
        assert_eq!(mode_prob(3, 0.0, &unit()), 0.0);
        assert_relative_eq!(mode_prob(0, 1.0, &unit()), (-0.25f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(
            mode_prob(0, 1.0, &unit()),
            0.778_800_783_071_404_9,
            max_relative = 1e-15
        );
        // large q stays finite in log space
        let lp = ln_mode_prob(500, 40.0, &unit());
        assert!(lp.is_finite());
    }

    #[test]
    fn leakage_is_tau_to_leading_order() {
        // τ = 0.01 ⇒ s = 0.2σ
        let psf = unit();
        let s = 0.2;
        let tau = psf.tau(s);
        let ratio = (1.0 - mode_prob(0, s, &psf)) / tau;
        assert!((0.99..=1.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn truncation_level() {
        assert_eq!(mode_truncation(0.0), 20);
        assert_eq!(mode_truncation(100.0), 210);
    }

    #[test]
    fn overlap_values() {
        assert_eq!(source_overlap(0.0, &unit()), 1.0);
        assert_relative_eq!(source_overlap(2.0, &unit()), (-0.5f64).exp(), max_relative = 1e-15);
        let s = 0.1;
        let exact = one_minus_overlap_sq(s, &unit());
        let approx_ = s * s / 4.0;
        assert!(((exact - approx_) / exact).abs() < 0.01);
    }

    #[test]
    fn q0_detection() {
        assert_eq!(q0_detection_prob(0.0, 0.0, &unit()), 1.0);
        assert_relative_eq!(
            q0_detection_prob(0.0, 0.1, &unit()),
            (-0.0025f64).exp(),
            max_relative = 1e-15
        );
        // blind spot: source at 2θ is as bright in q = 0 as the aligned one
        let theta = 0.1;
        assert_eq!(
            q0_detection_prob(2.0 * theta, theta, &unit()),
            q0_detection_prob(0.0, theta, &unit())
        );
    }
}
