//! Singular-learning invariants for the one-vs-two source problem.
//!
//! Near the one-source point the KL function is, up to a smooth positive
//! factor, a monomial `ε^a s^b`. With a prior that is smooth and positive near
//! the origin the local zeta integral behaves like
//!
//! ```text
//! ∫∫ (ε^a s^b)^z dε ds  ∝  1 / ((a z + 1)(b z + 1)),
//! ```
//!
//! so the real log canonical threshold is `λ = min(1/a, 1/b)` and the
//! multiplicity counts the factors attaining it. The free energy then grows as
//! `λ ln n - (m - 1) ln ln n`.
//!
//! The second half of the module covers the misaligned binary-SPADE local
//! model in centred coordinates (sources at `-εs` and `(1-ε)s`), where the
//! linear displacement term cancels and the success-probability shift is
//! `Δ = a(θ) ε(1-ε) s² + O(s³)`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optics::{GaussianPsf, SceneParams};
use crate::quadrature::{refine, Agreement, GaussLegendre, QuadratureSpec};

/// Exponents of a normal-crossing KL monomial `ε^a_eps s^a_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonomialKl {
    pub a_eps: u32,
    pub a_s: u32,
}

impl MonomialKl {
    pub fn new(a_eps: u32, a_s: u32) -> Result<Self> {
        if a_eps == 0 || a_s == 0 {
            return Err(invalid("exponent", "monomial exponents must be at least 1"));
        }
        Ok(Self { a_eps, a_s })
    }

    /// Direct imaging, `ε² s²`.
    pub const DIRECT_IMAGING: Self = Self { a_eps: 2, a_s: 2 };
    /// Aligned SPADE, `ε s²`.
    pub const SPADE: Self = Self { a_eps: 1, a_s: 2 };

    /// `∫_0^1 ∫_0^1 (ε^a s^b)^z dε ds = 1/((a z + 1)(b z + 1))` for `z > -λ`.
    pub fn unit_box_zeta(&self, z: f64) -> f64 {
        1.0 / ((self.a_eps as f64 * z + 1.0) * (self.a_s as f64 * z + 1.0))
    }
}

/// Real log canonical threshold and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoleStructure {
    pub lambda: Ratio<u32>,
    pub multiplicity: u32,
}

impl PoleStructure {
    pub fn new(lambda: Ratio<u32>, multiplicity: u32) -> Result<Self> {
        if *lambda.numer() == 0 {
            return Err(invalid("lambda", "must be positive"));
        }
        if multiplicity == 0 {
            return Err(invalid("multiplicity", "must be at least 1"));
        }
        Ok(Self { lambda, multiplicity })
    }

    pub fn lambda_f64(&self) -> f64 {
        *self.lambda.numer() as f64 / *self.lambda.denom() as f64
    }
}

/// Rightmost pole of the local zeta function of a monomial KL.
pub fn zeta_pole_structure(m: &MonomialKl) -> PoleStructure {
    let top = m.a_eps.max(m.a_s);
    let multiplicity = if m.a_eps == m.a_s { 2 } else { 1 };
    PoleStructure {
        lambda: Ratio::new(1, top),
        multiplicity,
    }
}

/// `λ ln n - (m - 1) ln ln n`, in nats. Requires `n ≥ 3`.
// negated comparisons also reject NaN
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn free_energy_asymptote(n: f64, pole: &PoleStructure) -> Result<f64> {
    if !(n >= 3.0) {
        return Err(Error::Domain(format!("free-energy asymptote needs n >= 3, got {n}")));
    }
    let ln_n = n.ln();
    Ok(pole.lambda_f64() * ln_n - (pole.multiplicity as f64 - 1.0) * ln_n.ln())
}

/// Parameters of the misaligned binary-SPADE local model at offset `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalModelParams {
    pub gamma: f64,
    pub a_theta: f64,
    /// Upper limit of the local coordinate `y`.
    pub cap: f64,
}

impl LocalModelParams {
    pub fn new(theta: f64, psf: &GaussianPsf, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(invalid("cap", "local integration cap must be positive"));
        }
        Ok(Self {
            gamma: psf.half_width_units(theta),
            a_theta: local_shift_coefficient(theta, psf),
            cap,
        })
    }
}

/// `a(θ) = e^{-γ²}(2γ² - 1) / 4σ²`, the coefficient of `ε(1-ε)s²` in Δ.
pub fn local_shift_coefficient(theta: f64, psf: &GaussianPsf) -> f64 {
    let g = psf.half_width_units(theta);
    let g2 = g * g;
    let sigma = psf.sigma();
    (-g2).exp() * (2.0 * g2 - 1.0) / (4.0 * sigma * sigma)
}

/// Shift of the `q = 0` success probability in centred coordinates.
pub fn delta_centered(scene: &SceneParams, psf: &GaussianPsf) -> Result<f64> {
    scene.validate()?;
    Ok(delta_centered_at(scene.epsilon, scene.s, scene.theta, psf))
}

/// [`delta_centered`] for any real `s` (negative `s` mirrors the pair).
///
/// Each term is written as `e^{-γ²} expm1(γ² - (γ ± δ)²)` so the result
/// keeps full relative accuracy as `s → 0`.
pub fn delta_centered_at(epsilon: f64, s: f64, theta: f64, psf: &GaussianPsf) -> f64 {
    let g = psf.half_width_units(theta);
    let b = psf.half_width_units(s);
    let bright = epsilon * b;
    let faint = (1.0 - epsilon) * b;
    let t1 = (1.0 - epsilon) * (-(2.0 * g * bright + bright * bright)).exp_m1();
    let t2 = epsilon * (-(-2.0 * g * faint + faint * faint)).exp_m1();
    (-g * g).exp() * (t1 + t2)
}

/// Main-text shift `ε (p_s(θ) - p_0(θ))` (bright source at the origin) for
/// any real `s`. Unlike the centred form it carries a term linear in `s`.
pub fn delta_main_text_at(epsilon: f64, s: f64, theta: f64, psf: &GaussianPsf) -> f64 {
    let g = psf.half_width_units(theta);
    let gs = psf.half_width_units(s);
    epsilon * (-g * g).exp() * (gs * (2.0 * g - gs)).exp_m1()
}

/// Physical separation at local coordinate `y`:
/// `s = (√(p_0(1-p_0)) / |a(θ)|)^{1/2} y n^{-1/4}`.
pub fn local_rescale_separation(y: f64, n: u64, theta: f64, psf: &GaussianPsf) -> Result<f64> {
    if !(y >= 0.0 && y.is_finite()) {
        return Err(invalid("y", "local coordinate must be finite and >= 0"));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let a = local_shift_coefficient(theta, psf);
    if a.abs() < 1e-14 {
        return Err(Error::DegenerateCoefficient(a.abs()));
    }
    let g = psf.half_width_units(theta);
    let p0 = (-g * g).exp();
    let q0 = -(-g * g).exp_m1();
    if !(p0 > 0.0 && q0 > 0.0) {
        return Err(Error::Domain(format!(
            "local rescaling needs 0 < p0 < 1, got p0 = {p0}"
        )));
    }
    let scale = ((p0 * q0).sqrt() / a.abs()).sqrt();
    // sqrt(sqrt(n)) keeps s(16n)/s(n) = 1/2 exact in floating point
    Ok(scale * y / (n as f64).sqrt().sqrt())
}

/// Which deterministic KL sign the local statistic carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalSign {
    /// Null-local, `-½ u² y⁴`.
    Minus,
    /// Alternative-local, `+½ u² y⁴`.
    Plus,
}

impl LocalSign {
    fn factor(self) -> f64 {
        match self {
            LocalSign::Minus => -1.0,
            LocalSign::Plus => 1.0,
        }
    }
}

/// `J^(∓)(ξ; B) = ∫_0^1 dε ∫_0^B dy exp(∓½ u(ε)² y⁴ + ξ u(ε) y²)`, `u = ε(1-ε)`.
pub fn j_statistic(xi: f64, cap: f64, sign: LocalSign, quad: &QuadratureSpec) -> Result<f64> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(invalid("cap", "local integration cap must be positive"));
    }
    if !xi.is_finite() {
        return Err(invalid("xi", "must be finite"));
    }
    let k = 0.5 * sign.factor();
    refine(quad, Agreement::Relative, |level| {
        let rule = GaussLegendre::new(quad.nodes_per_axis << level);
        let (eps, we) = rule.on_interval(0.0, 1.0);
        let (ys, wy) = rule.on_interval(0.0, cap);
        let y2: Vec<f64> = ys.iter().map(|y| y * y).collect();
        eps.iter()
            .zip(&we)
            .map(|(e, w_e)| {
                let u = e * (1.0 - e);
                let inner: f64 = y2
                    .iter()
                    .zip(&wy)
                    .map(|(y2, w_y)| {
                        let uy2 = u * y2;
                        w_y * (k * uy2 * uy2 + xi * uy2).exp()
                    })
                    .sum();
                w_e * inner
            })
            .sum()
    })
}
