//! Exact finite-n Bayes free energies for direct imaging over bounded uniform
//! prior windows, the local Gaussian-field approximation, and the Monte Carlo
//! replication used to compare them under the one-source null.
//!
//! Free energies are `F_n = -ln(m_1/m_0)` in nats. Both the exact and local
//! integrals use tensor Gauss–Legendre rules on the prior box with weights
//! folded into a max-shifted log-sum-exp.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::log_sum_exp;
use crate::optics::{self, GaussianPsf, SceneParams};
use crate::quadrature::{refine, Agreement, GaussLegendre};
use crate::rng::replicate_stream;
use crate::singular::{free_energy_asymptote, zeta_pole_structure, MonomialKl};

pub use crate::quadrature::QuadratureSpec;

/// Uniform prior on `[0, eps_max] × [0, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorWindow {
    pub eps_max: f64,
    pub s_max: f64,
}

impl PriorWindow {
    pub fn new(eps_max: f64, s_max: f64) -> Result<Self> {
        let w = Self { eps_max, s_max };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_max > 0.0 && self.eps_max < 1.0) {
            return Err(invalid("eps_max", format!("must lie in (0, 1), got {}", self.eps_max)));
        }
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return Err(invalid("s_max", format!("must be positive, got {}", self.s_max)));
        }
        Ok(())
    }

    /// Largest leading-order direct-imaging KL in the window, `ε_max² s_max² / 2σ²`.
    pub fn d_max_lead(&self, psf: &GaussianPsf) -> f64 {
        let sigma = psf.sigma();
        self.eps_max * self.eps_max * self.s_max * self.s_max / (2.0 * sigma * sigma)
    }

    pub fn area(&self) -> f64 {
        self.eps_max * self.s_max
    }
}

/// One Monte Carlo replicate of the free-energy comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyRecord {
    pub n: usize,
    pub f_exact: f64,
    pub f_local: f64,
    pub centered_exact: f64,
    pub centered_local: f64,
    pub replicate_id: u64,
    pub seed: u64,
}

/// `n` draws from `N(0, σ²)` on the stream keyed by `(seed, replicate)`.
///
/// Samples for different `n` on the same key are prefixes of one another.
pub fn simulate_h0(n: usize, psf: &GaussianPsf, seed: u64, replicate: u64) -> Vec<f64> {
    let mut rng = replicate_stream(seed, replicate);
    let sigma = psf.sigma();
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `Σ_i ln(p_1(x_i | ε, s) / p_0(x_i))`.
pub fn log_likelihood_ratio(sample: &[f64], epsilon: f64, s: f64, psf: &GaussianPsf) -> f64 {
    let scene = SceneParams { epsilon, s, theta: 0.0 };
    sample.iter().map(|&x| optics::ln_density_ratio(x, &scene, psf)).sum()
}

/// Running `Σ ln f_i` kept as a product, taking a logarithm only when the
/// product drifts toward the ends of the floating-point range.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogProduct {
    total: f64,
    prod: f64,
}

impl LogProduct {
    pub(crate) fn new() -> Self {
        Self { total: 0.0, prod: 1.0 }
    }

    #[inline]
    pub(crate) fn push(&mut self, factor: f64) {
        self.prod *= factor;
        if !(1e-200..=1e200).contains(&self.prod) {
            self.total += self.prod.ln();
            self.prod = 1.0;
        }
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.total + self.prod.ln()
    }
}

/// Prior-box nodes with log weights that include the uniform prior density.
struct BoxRule {
    eps: Vec<f64>,
    s: Vec<f64>,
    ln_w_eps: Vec<f64>,
    ln_w_s: Vec<f64>,
}

impl BoxRule {
    fn new(window: &PriorWindow, nodes: usize) -> Self {
        let rule = GaussLegendre::new(nodes);
        let (eps, we) = rule.on_interval(0.0, window.eps_max);
        let (s, ws) = rule.on_interval(0.0, window.s_max);
        let ln_area = window.area().ln();
        Self {
            eps,
            s,
            ln_w_eps: we.iter().map(|w| w.ln() - ln_area).collect(),
            ln_w_s: ws.iter().map(|w| w.ln()).collect(),
        }
    }

    /// `ln ∫∫ exp(g(ε, s)) dφ` given `g` on the node grid (ε-major).
    fn log_integral(&self, log_integrand: &[f64]) -> f64 {
        let ns = self.s.len();
        log_sum_exp(log_integrand.iter().enumerate().map(|(k, v)| {
            let (i, j) = (k / ns, k % ns);
            v + self.ln_w_eps[i] + self.ln_w_s[j]
        }))
    }
}

/// `ln(m_1/m_0)` for a direct-imaging sample over a uniform prior window.
pub fn log_marginal_ratio(
    sample: &[f64],
    window: &PriorWindow,
    psf: &GaussianPsf,
    quad: &QuadratureSpec,
) -> Result<f64> {
    window.validate()?;
    quad.validate()?;
    if sample.is_empty() {
        return Ok(0.0);
    }
    let two_var = 2.0 * psf.sigma() * psf.sigma();
    refine(quad, Agreement::Absolute, |level| {
        let rule = BoxRule::new(window, quad.nodes_per_axis << level);
        let ns = rule.s.len();
        let mut grid = vec![0.0; rule.eps.len() * ns];
        let mut rm1 = vec![0.0; sample.len()];
        for (j, &s) in rule.s.iter().enumerate() {
            for (r, &x) in rm1.iter_mut().zip(sample) {
                *r = ((2.0 * x * s - s * s) / two_var).exp_m1();
            }
            for (i, &eps) in rule.eps.iter().enumerate() {
                let mut acc = LogProduct::new();
                for &r in &rm1 {
                    acc.push(1.0 + eps * r);
                }
                grid[i * ns + j] = acc.value();
            }
        }
        rule.log_integral(&grid)
    })
}

/// `F_n = F_{1,n} - F_{0,n} = -ln(m_1/m_0)`.
pub fn free_energy_exact(
    sample: &[f64],
    window: &PriorWindow,
    psf: &GaussianPsf,
    quad: &QuadratureSpec,
) -> Result<f64> {
    log_marginal_ratio(sample, window, psf, quad).map(|v| -v)
}

/// Local Gaussian-field free energy
/// `-ln ∫∫ exp(√n ξ_n εs/σ - n (εs)²/2σ²) dφ`, `ξ_n = Σ x_i / (σ√n)`.
///
/// The integrand is the second-order expansion of the log-likelihood ratio
/// about `(ε, s) = (0, 0)` and depends on the parameters only through `εs`.
pub fn free_energy_local(
    sample: &[f64],
    window: &PriorWindow,
    psf: &GaussianPsf,
    quad: &QuadratureSpec,
) -> Result<f64> {
    window.validate()?;
    quad.validate()?;
    if sample.is_empty() {
        return Ok(0.0);
    }
    let sigma = psf.sigma();
    let n = sample.len() as f64;
    let linear = sample.iter().sum::<f64>() / sigma;
    local_log_integral(linear, n, window, sigma, quad).map(|v| -v)
}

/// `ln ∫∫ exp(t u/σ - n u²/2σ²) dφ` with `u = εs`; `t = √n ξ_n`.
pub fn local_log_integral(t: f64, n: f64, window: &PriorWindow, sigma: f64, quad: &QuadratureSpec) -> Result<f64> {
    refine(quad, Agreement::Absolute, |level| {
        let rule = BoxRule::new(window, quad.nodes_per_axis << level);
        let grid: Vec<f64> = rule
            .eps
            .iter()
            .flat_map(|&e| {
                rule.s.iter().map(move |&s| {
                    let u = e * s / sigma;
                    t * u - 0.5 * n * u * u
                })
            })
            .collect();
        rule.log_integral(&grid)
    })
}

/// `F - (½ ln n - ln ln n)`; requires `n ≥ 3`.
pub fn center_free_energy(f: f64, n: u64) -> Result<f64> {
    Ok(f - leading_singular_term(n)?)
}

/// `½ ln n - ln ln n`, the direct-imaging free-energy asymptote.
pub fn leading_singular_term(n: u64) -> Result<f64> {
    free_energy_asymptote(n as f64, &zeta_pole_structure(&MonomialKl::DIRECT_IMAGING))
}

/// Type-7 (linear interpolation between order statistics) empirical quantile.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", "quantile level must lie in [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical 10%, 50% and 90% quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

pub fn quantile_summary(values: &[f64]) -> Result<QuantileSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(QuantileSummary {
        q10: quantile_sorted(&sorted, 0.10),
        median: quantile_sorted(&sorted, 0.50),
        q90: quantile_sorted(&sorted, 0.90),
    })
}

/// Exact and local free energies for `replicates` null samples of size `n`.
///
/// Replicate `r` uses the stream keyed by `(seed, r)`; rows come back in
/// replicate order whatever the thread schedule.
pub fn free_energy_batch(
    n: usize,
    window: &PriorWindow,
    psf: &GaussianPsf,
    quad: &QuadratureSpec,
    replicates: u64,
    seed: u64,
) -> Result<Vec<FreeEnergyRecord>> {
    let offset = leading_singular_term(n as u64)?;
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let sample = simulate_h0(n, psf, seed, r);
            let f_exact = free_energy_exact(&sample, window, psf, quad)?;
            let f_local = free_energy_local(&sample, window, psf, quad)?;
            Ok(FreeEnergyRecord {
                n,
                f_exact,
                f_local,
                centered_exact: f_exact - offset,
                centered_local: f_local - offset,
                replicate_id: r,
                seed,
            })
        })
        .collect()
}
