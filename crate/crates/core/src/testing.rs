//! Finite-n Neyman–Pearson power for direct imaging and misaligned binary
//! SPADE under common physical conditions.
//!
//! Binary SPADE records only whether each photon lands in the fundamental
//! mode of a demultiplexer offset by `θ`. Under the two-source alternative the
//! outcome is a two-component Bernoulli mixture, which is itself
//! `Bernoulli(p_1)` with `p_1 = (1-ε) p_0 + ε p_s`; the count `K` of `q = 0`
//! photons is therefore binomial under both hypotheses and power is computed
//! exactly from a randomized test of exact size `α`.
//!
//! Direct-imaging power uses common-random-number Monte Carlo. Each photon of
//! replicate `r` consumes one uniform (source assignment) and one standard
//! normal (position) from the stream keyed by `(seed, r)`, always in that
//! order, so every `(n, s)` cell of a grid sees the same underlying deviates.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::LogProduct;
use crate::error::{invalid, Error, Result};
use crate::numerics::ln_binomial_pmf;
use crate::optics::{self, GaussianPsf, SceneParams};
use crate::rng::replicate_stream;

/// Minimum replicate count accepted by [`di_power_mc`].
pub const MIN_MC_REPS: usize = 1000;

/// Fundamental-mode detection rates of the misaligned binary-SPADE model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySpadeModel {
    p0: f64,
    q0: f64,
    ps: f64,
    delta: f64,
}

impl BinarySpadeModel {
    /// `p_0 = e^{-γ²}`, `p_s = e^{-(γ - g_s)²}`, `p_1 = p_0 + ε (p_s - p_0)`.
    ///
    /// `p_s - p_0` is formed as `p_0 expm1(g_s (2γ - g_s))`, which is exactly
    /// zero at `s = 2θ`, so `p_1 == p_0` holds bit-for-bit at the blind spot.
    pub fn new(scene: &SceneParams, psf: &GaussianPsf) -> Result<Self> {
        scene.validate()?;
        let g = psf.half_width_units(scene.theta);
        let gs = psf.half_width_units(scene.s);
        let p0 = (-g * g).exp();
        let q0 = -(-g * g).exp_m1();
        let ps_minus_p0 = p0 * (gs * (2.0 * g - gs)).exp_m1();
        Ok(Self {
            p0,
            q0,
            ps: p0 + ps_minus_p0,
            delta: scene.epsilon * ps_minus_p0,
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// `1 - p_0`, accurate when `p_0` is close to one.
    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn ps(&self) -> f64 {
        self.ps
    }

    pub fn p1(&self) -> f64 {
        self.p0 + self.delta
    }

    /// `p_1 - p_0`.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

pub fn binary_spade_model(scene: &SceneParams, psf: &GaussianPsf) -> Result<BinarySpadeModel> {
    BinarySpadeModel::new(scene, psf)
}

/// Separation at which binary SPADE cannot tell one source from two.
pub fn blind_spot_separation(theta: f64) -> f64 {
    2.0 * theta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Reject for large counts.
    Upper,
    /// Reject for small counts.
    Lower,
    /// `p_1 = p_0`: reject with probability `α` regardless of the data.
    Degenerate,
}

/// Most powerful level-α test of `Binomial(n, p_0)` against `Binomial(n, p_1)`.
///
/// Rejects outright beyond `k_star` (above for [`Direction::Upper`], below for
/// [`Direction::Lower`]) and with probability `gamma_r` at `k_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedTest {
    pub direction: Direction,
    pub k_star: u64,
    pub gamma_r: f64,
    pub alpha: f64,
    pub n: u64,
    pub p0: f64,
}

impl RandomizedTest {
    /// Rejection probability when `K ~ Binomial(n, p)`.
    pub fn rejection_probability(&self, p: f64) -> f64 {
        if self.direction == Direction::Degenerate {
            return self.alpha;
        }
        let pmf = binomial_pmf_vec(self.n, p);
        let k = self.k_star as usize;
        let (below, above) = (&pmf[..k], &pmf[k + 1..]);
        let (strict, kept) = match self.direction {
            Direction::Upper => (above, below),
            _ => (below, above),
        };
        let at = pmf[k];
        // sum whichever side is smaller so powers near 1 keep full precision
        let strict_mass = sorted_sum(strict);
        if strict_mass <= 0.5 {
            strict_mass + self.gamma_r * at
        } else {
            1.0 - sorted_sum(kept) - (1.0 - self.gamma_r) * at
        }
    }

    /// Size under the null it was built for.
    pub fn size(&self) -> f64 {
        self.rejection_probability(self.p0)
    }
}

fn binomial_pmf_vec(n: u64, p: f64) -> Vec<f64> {
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    (0..=n).map(|k| ln_binomial_pmf(n, k, ln_p, ln_q).exp()).collect()
}

fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Builds the exact-size randomized Neyman–Pearson test.
pub fn randomized_np_binomial(n: u64, p0: f64, p1: f64, alpha: f64) -> Result<RandomizedTest> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Domain(format!("p0 must lie in (0, 1), got {p0}")));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Domain(format!("p1 must lie in [0, 1], got {p1}")));
    }
    let direction = if p1 > p0 {
        Direction::Upper
    } else if p1 < p0 {
        Direction::Lower
    } else {
        return Ok(RandomizedTest {
            direction: Direction::Degenerate,
            k_star: 0,
            gamma_r: alpha,
            alpha,
            n,
            p0,
        });
    };
    let pmf = binomial_pmf_vec(n, p0);
    let order: Box<dyn Iterator<Item = u64>> = match direction {
        Direction::Upper => Box::new((0..=n).rev()),
        _ => Box::new(0..=n),
    };
    let mut strict = 0.0;
    let mut boundary = (n, 0.0);
    for k in order {
        let mass = pmf[k as usize];
        if strict + mass > alpha {
            boundary = (k, (alpha - strict) / mass);
            break;
        }
        strict += mass;
        boundary = (k, 0.0);
    }
    let (k_star, gamma_r) = boundary;
    Ok(RandomizedTest {
        direction,
        k_star,
        gamma_r: gamma_r.clamp(0.0, 1.0),
        alpha,
        n,
        p0,
    })
}

/// Power of `test` when the photon count follows `Binomial(n, p1)`.
pub fn np_power_exact(test: &RandomizedTest, n: u64, p1: f64) -> Result<f64> {
    if n != test.n {
        return Err(Error::Domain(format!("test was built for n = {}, not {n}", test.n)));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Domain(format!("p1 must lie in [0, 1], got {p1}")));
    }
    Ok(test.rejection_probability(p1).clamp(0.0, 1.0))
}

/// Which measurement a power point refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "DI")]
    DirectImaging,
    #[serde(rename = "bSPADE")]
    BinarySpade,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::DirectImaging => "DI",
            Scheme::BinarySpade => "bSPADE",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub s: f64,
    pub n: usize,
    pub power: f64,
    /// Monte Carlo standard error; zero for exact computations.
    pub std_err: f64,
    pub scheme: Scheme,
}

/// Exact binary-SPADE power at one `(scene, n)`.
pub fn bspade_power(scene: &SceneParams, psf: &GaussianPsf, n: usize, alpha: f64) -> Result<PowerPoint> {
    let model = BinarySpadeModel::new(scene, psf)?;
    let test = randomized_np_binomial(n as u64, model.p0(), model.p1(), alpha)?;
    Ok(PowerPoint {
        s: scene.s,
        n,
        power: np_power_exact(&test, n as u64, model.p1())?,
        std_err: 0.0,
        scheme: Scheme::BinarySpade,
    })
}

/// Simple-versus-simple direct-imaging log-likelihood ratio
/// `Σ ln(1 + ε(r(x_i) - 1))`, positions measured from the bright source.
pub fn di_lrt_statistic(sample: &[f64], scene: &SceneParams, psf: &GaussianPsf) -> f64 {
    sample.iter().map(|&x| optics::ln_density_ratio(x, scene, psf)).sum()
}

/// Power from a null and an alternative sample of the same statistic.
///
/// The critical value is the `(⌊αM⌋+1)`-th largest null statistic; ties at
/// it are rejected with the probability that makes the empirical size
/// exactly `α`, and the same randomization is applied to the alternative.
fn empirical_power(null: &mut [f64], alt: &[f64], alpha: f64) -> (f64, f64) {
    let m = null.len();
    null.sort_by(|a, b| b.total_cmp(a));
    let k = ((alpha * m as f64).floor() as usize).min(m - 1);
    let c = null[k];
    let above = null.iter().take_while(|&&v| v > c).count();
    let ties = null[above..].iter().take_while(|&&v| v == c).count();
    let gamma = ((alpha * m as f64 - above as f64) / ties as f64).clamp(0.0, 1.0);
    let (mut alt_above, mut alt_ties) = (0usize, 0usize);
    for &v in alt {
        if v > c {
            alt_above += 1;
        } else if v == c {
            alt_ties += 1;
        }
    }
    let power = (alt_above as f64 + gamma * alt_ties as f64) / m as f64;
    let std_err = (power * (1.0 - power) / m as f64).sqrt();
    (power, std_err)
}

/// CRN Monte Carlo direct-imaging power on an `n × s` grid, row-major in `n`.
///
/// Photon `i` of replicate `r` sits at `σZ_i` under the null and at
/// `σZ_i + s·1{U_i < ε}` under the alternative. The detector offset `θ` is a
/// common shift of every position and cancels from the statistic, so it never
/// enters. The value in each cell depends only on `(n, s)`, `ε`, `α`,
/// `mc_reps` and `seed`, not on the rest of the grid.
pub fn di_power_grid(
    epsilon: f64,
    psf: &GaussianPsf,
    n_grid: &[usize],
    s_grid: &[f64],
    alpha: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    check_alpha(alpha)?;
    if mc_reps < MIN_MC_REPS {
        return Err(Error::InsufficientReplicates {
            required: MIN_MC_REPS,
            got: mc_reps,
        });
    }
    if n_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(invalid("epsilon", "direct-imaging power needs 0 <= epsilon < 1"));
    }
    for &s in s_grid {
        SceneParams::new(epsilon, s, 0.0)?;
    }
    let sigma = psf.sigma();
    // visit n in increasing order so one photon stream serves every n
    let mut n_order: Vec<usize> = (0..n_grid.len()).collect();
    n_order.sort_by_key(|&i| n_grid[i]);
    let n_max = *n_grid.iter().max().expect("nonempty");

    let ns = s_grid.len();
    let width = 2 * n_grid.len() * ns;
    let slope: Vec<f64> = s_grid.iter().map(|s| s / sigma).collect();
    let shrink: Vec<f64> = s_grid.iter().map(|s| (-s * s / (2.0 * sigma * sigma)).exp()).collect();
    let grow: Vec<f64> = s_grid.iter().map(|s| (s * s / (2.0 * sigma * sigma)).exp()).collect();

    let mut bank = vec![0.0f64; mc_reps * width];
    bank.par_chunks_mut(width).enumerate().for_each(|(r, out)| {
        let mut rng = replicate_stream(seed, r as u64);
        let mut null = vec![LogProduct::new(); ns];
        let mut alt = vec![LogProduct::new(); ns];
        let mut next = 0;
        for photon in 1..=n_max {
            let u: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            let faint = u < epsilon;
            for j in 0..ns {
                let e = (z * slope[j]).exp();
                let f_null = 1.0 + epsilon * (e * shrink[j] - 1.0);
                null[j].push(f_null);
                if faint {
                    alt[j].push(1.0 + epsilon * (e * grow[j] - 1.0));
                } else {
                    alt[j].push(f_null);
                }
            }
            while next < n_order.len() && n_grid[n_order[next]] == photon {
                let base = 2 * n_order[next] * ns;
                for j in 0..ns {
                    out[base + j] = null[j].value();
                    out[base + ns + j] = alt[j].value();
                }
                next += 1;
            }
        }
        // n = 0 cells: every statistic is zero
        while next < n_order.len() {
            let base = 2 * n_order[next] * ns;
            out[base..base + 2 * ns].fill(0.0);
            next += 1;
        }
    });

    let cells: Vec<(usize, usize)> = (0..n_grid.len()).flat_map(|a| (0..ns).map(move |j| (a, j))).collect();
    let points = cells
        .par_iter()
        .map(|&(a, j)| {
            let base = 2 * a * ns;
            let mut null: Vec<f64> = (0..mc_reps).map(|r| bank[r * width + base + j]).collect();
            let alt: Vec<f64> = (0..mc_reps).map(|r| bank[r * width + base + ns + j]).collect();
            let (power, std_err) = empirical_power(&mut null, &alt, alpha);
            PowerPoint {
                s: s_grid[j],
                n: n_grid[a],
                power,
                std_err,
                scheme: Scheme::DirectImaging,
            }
        })
        .collect();
    Ok(points)
}

/// CRN Monte Carlo direct-imaging power at one `(scene, n)`.
pub fn di_power_mc(
    scene: &SceneParams,
    psf: &GaussianPsf,
    n: usize,
    alpha: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<PowerPoint> {
    scene.validate()?;
    let mut pts = di_power_grid(scene.epsilon, psf, &[n], &[scene.s], alpha, mc_reps, seed)?;
    Ok(pts.remove(0))
}

/// Power versus separation at fixed `n`.
///
/// Binary-SPADE points are exact; direct-imaging points share one CRN
/// deviate bank across the whole grid.
#[allow(clippy::too_many_arguments)]
pub fn power_curve(
    scheme: Scheme,
    s_grid: &[f64],
    n: usize,
    template: &SceneParams,
    psf: &GaussianPsf,
    alpha: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    power_table(scheme, &[n], s_grid, template, psf, alpha, mc_reps, seed)
}

/// Power versus sample size at fixed separations, ordered by `s` then `n`.
#[allow(clippy::too_many_arguments)]
pub fn power_vs_n(
    scheme: Scheme,
    n_grid: &[usize],
    s_values: &[f64],
    template: &SceneParams,
    psf: &GaussianPsf,
    alpha: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    let table = power_table(scheme, n_grid, s_values, template, psf, alpha, mc_reps, seed)?;
    let ns = s_values.len();
    Ok((0..ns)
        .flat_map(|j| (0..n_grid.len()).map(move |a| a * ns + j))
        .map(|k| table[k])
        .collect())
}

/// Power over an `n × s` grid, row-major in `n`.
#[allow(clippy::too_many_arguments)]
pub fn power_table(
    scheme: Scheme,
    n_grid: &[usize],
    s_grid: &[f64],
    template: &SceneParams,
    psf: &GaussianPsf,
    alpha: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    if n_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    template.validate()?;
    match scheme {
        Scheme::DirectImaging => di_power_grid(template.epsilon, psf, n_grid, s_grid, alpha, mc_reps, seed),
        Scheme::BinarySpade => n_grid
            .iter()
            .flat_map(|&n| s_grid.iter().map(move |&s| (n, s)))
            .map(|(n, s)| bspade_power(&template.with_separation(s), psf, n, alpha))
            .collect(),
    }
}
