//! Gauss–Legendre rules and refinement drivers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Node count and stopping rule for a refined quadrature.
///
/// Level `l` of a refinement uses `nodes_per_axis * 2^l` nodes per axis
/// (tensor rules) or that many panels' worth of nodes (composite 1-D rules).
/// Two successive levels must agree to `rel_tol`; at most
/// `refinement_levels` refinements are attempted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_axis: usize,
    pub refinement_levels: usize,
    pub rel_tol: f64,
}

impl QuadratureSpec {
    pub fn new(nodes_per_axis: usize, refinement_levels: usize, rel_tol: f64) -> Result<Self> {
        let spec = Self {
            nodes_per_axis,
            refinement_levels,
            rel_tol,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 8 {
            return Err(invalid("nodes_per_axis", "must be at least 8"));
        }
        if self.refinement_levels < 1 {
            return Err(invalid("refinement_levels", "must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(invalid("rel_tol", "must be positive and finite"));
        }
        Ok(())
    }

    /// Defaults for the bounded-prior free-energy integrals.
    pub fn free_energy_default() -> Self {
        Self {
            nodes_per_axis: 32,
            refinement_levels: 2,
            rel_tol: 1e-7,
        }
    }

    /// Defaults for the local J statistics.
    pub fn j_statistic_default() -> Self {
        Self {
            nodes_per_axis: 128,
            refinement_levels: 3,
            rel_tol: 1e-9,
        }
    }

    /// Defaults for the direct-imaging KL line integral.
    pub fn kl_default() -> Self {
        Self {
            nodes_per_axis: 32,
            refinement_levels: 6,
            rel_tol: 1e-10,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// How two successive refinement levels are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Agreement {
    /// `|cur - prev| <= tol * |cur|`.
    Relative,
    /// `|cur - prev| <= tol`; used for log-integrals, where this is a
    /// relative criterion on the underlying integral.
    Absolute,
}

/// Runs `eval(level)` for successive levels until two agree.
pub(crate) fn refine<F>(spec: &QuadratureSpec, agreement: Agreement, mut eval: F) -> Result<f64>
where
    F: FnMut(usize) -> f64,
{
    spec.validate()?;
    let mut previous = f64::NAN;
    let mut current = eval(0);
    for level in 1..=spec.refinement_levels {
        previous = current;
        current = eval(level);
        let diff = (current - previous).abs();
        let scale = match agreement {
            Agreement::Relative => current.abs(),
            Agreement::Absolute => 1.0,
        };
        if diff <= spec.rel_tol * scale || diff == 0.0 {
            return Ok(current);
        }
    }
    Err(Error::IntegrationNotConverged {
        levels: spec.refinement_levels,
        previous,
        current,
        tolerance: spec.rel_tol,
    })
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub(crate) fn composite<F: Fn(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, f: &F) -> f64 {
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + width * p as f64;
            rule.integrate(lo, lo + width, f)
        })
        .sum()
}
