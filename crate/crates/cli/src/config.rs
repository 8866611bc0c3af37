//! Experiment configuration: a TOML file plus command-line overrides.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sourcedisc::bayes::PriorWindow;
use sourcedisc::testing::{Scheme, MIN_MC_REPS};
use sourcedisc::{GaussianPsf, QuadratureSpec, SceneParams};

/// Problems with the configuration itself, reported with exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Fast defaults for continuous integration.
    Ci,
    /// Replicate counts for a full reproduction.
    Paper,
}

impl Profile {
    pub fn mc_reps(self) -> usize {
        match self {
            Profile::Ci => 20_000,
            Profile::Paper => 200_000,
        }
    }

    pub fn replicates(self) -> u64 {
        match self {
            Profile::Ci => 512,
            Profile::Paper => 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum SchemeChoice {
    #[serde(rename = "DI")]
    #[value(name = "DI", alias = "di")]
    Di,
    #[serde(rename = "bSPADE")]
    #[value(name = "bSPADE", alias = "bspade")]
    Bspade,
    #[serde(rename = "both")]
    #[value(name = "both")]
    Both,
}

impl SchemeChoice {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeChoice::Di => vec![Scheme::DirectImaging],
            SchemeChoice::Bspade => vec![Scheme::BinarySpade],
            SchemeChoice::Both => vec![Scheme::DirectImaging, Scheme::BinarySpade],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Config {
    pub n_values: Vec<usize>,
    pub s_grid: Vec<f64>,
    pub panel_d_s: Vec<f64>,
    pub panel_d_n: Vec<usize>,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            n_values: vec![200, 500, 2000],
            s_grid: (1..=40).map(|k| k as f64 / 100.0).collect(),
            panel_d_s: vec![0.05, 0.10, 0.20],
            panel_d_n: vec![100, 200, 500, 1000, 2000, 5000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    /// `[eps_max, s_max]` pairs.
    pub windows: Vec<[f64; 2]>,
    pub n_grid: Vec<usize>,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            windows: vec![[0.10, 0.25], [0.10, 0.30], [0.15, 0.40]],
            n_grid: vec![32, 64, 128, 256, 512, 1024, 2048],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlTableConfig {
    pub epsilons: Vec<f64>,
    pub separations: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl Default for KlTableConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.0, 0.0125, 0.025, 0.05, 0.1, 0.3],
            separations: vec![0.0125, 0.025, 0.05, 0.1, 0.2, 0.5, 1.0],
            thetas: vec![0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZetaConfig {
    /// Extra `[a_eps, a_s]` exponent pairs reported next to DI and SPADE.
    pub extra_pairs: Vec<[u32; 2]>,
    pub n_grid: Vec<f64>,
    /// Cap `B` of the local coordinate in the `J` table.
    pub j_cap: f64,
    pub xi_grid: Vec<f64>,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        Self {
            extra_pairs: Vec::new(),
            n_grid: vec![10.0, 100.0, 1e3, 1e4, 1e5, 1e6],
            j_cap: 5.0,
            xi_grid: (-3..=3).map(f64::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub scheme: SchemeChoice,
    /// Sample size for `power-curve`.
    pub n: usize,
    /// Separations for `power-curve`.
    pub s_grid: Vec<f64>,
    /// Sample sizes for `power-vs-n`.
    pub n_grid: Vec<usize>,
    /// Separations for `power-vs-n`.
    pub s_values: Vec<f64>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        let fig1 = Fig1Config::default();
        Self {
            scheme: SchemeChoice::Both,
            n: 200,
            s_grid: fig1.s_grid,
            n_grid: fig1.panel_d_n,
            s_values: fig1.panel_d_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeEnergyConfig {
    pub eps_max: f64,
    pub s_max: f64,
    pub n: usize,
}

impl Default for FreeEnergyConfig {
    fn default() -> Self {
        Self {
            eps_max: 0.10,
            s_max: 0.25,
            n: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub profile: Profile,
    pub sigma: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Monte Carlo replicates per power point; profile default when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_reps: Option<usize>,
    /// Free-energy replicates per `(window, n)`; profile default when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    /// Gauss–Legendre nodes per axis at the coarsest level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    pub svg: bool,
    pub fig1: Fig1Config,
    pub fig2: Fig2Config,
    pub kl_table: KlTableConfig,
    pub zeta: ZetaConfig,
    pub power: PowerConfig,
    pub free_energy: FreeEnergyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            profile: Profile::Ci,
            sigma: 1.0,
            epsilon: 0.3,
            theta: 0.1,
            alpha: 0.05,
            seed: 12345,
            mc_reps: None,
            replicates: None,
            quad_nodes: None,
            svg: false,
            fig1: Fig1Config::default(),
            fig2: Fig2Config::default(),
            kl_table: KlTableConfig::default(),
            zeta: ZetaConfig::default(),
            power: PowerConfig::default(),
            free_energy: FreeEnergyConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Fills profile-dependent defaults so the echo records what actually ran.
    pub fn resolved(mut self) -> Self {
        self.mc_reps.get_or_insert(self.profile.mc_reps());
        self.replicates.get_or_insert(self.profile.replicates());
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn mc_reps(&self) -> usize {
        self.mc_reps.unwrap_or(self.profile.mc_reps())
    }

    pub fn replicates(&self) -> u64 {
        self.replicates.unwrap_or(self.profile.replicates())
    }

    pub fn psf(&self) -> GaussianPsf {
        GaussianPsf::new(self.sigma).expect("validated")
    }

    pub fn scene(&self) -> SceneParams {
        SceneParams::new(self.epsilon, 0.0, self.theta).expect("validated")
    }

    pub fn free_energy_quad(&self) -> QuadratureSpec {
        let base = QuadratureSpec::free_energy_default();
        self.with_nodes(base)
    }

    pub fn kl_quad(&self) -> QuadratureSpec {
        self.with_nodes(QuadratureSpec::kl_default())
    }

    pub fn j_quad(&self) -> QuadratureSpec {
        self.with_nodes(QuadratureSpec::j_statistic_default())
    }

    fn with_nodes(&self, base: QuadratureSpec) -> QuadratureSpec {
        match self.quad_nodes {
            Some(nodes) => QuadratureSpec {
                nodes_per_axis: nodes,
                ..base
            },
            None => base,
        }
    }

    pub fn windows(&self) -> Vec<PriorWindow> {
        self.fig2
            .windows
            .iter()
            .map(|&[e, s]| PriorWindow::new(e, s).expect("validated"))
            .collect()
    }

    /// Checks everything a run could trip over before any work starts.
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |what: String| Err(ConfigError::Invalid(what));
        let lib = |e: sourcedisc::Error| ConfigError::Invalid(e.to_string());
        GaussianPsf::new(self.sigma).map_err(lib)?;
        SceneParams::new(self.epsilon, 0.0, self.theta).map_err(lib)?;
        if self.epsilon >= 1.0 {
            return bad(format!("epsilon must be below 1, got {}", self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must fit in a signed 64-bit integer, got {}", self.seed));
        }
        if self.mc_reps() < MIN_MC_REPS {
            return bad(format!(
                "mc_reps must be at least {MIN_MC_REPS}, got {}",
                self.mc_reps()
            ));
        }
        if self.replicates() == 0 {
            return bad("replicates must be at least 1".into());
        }
        for quad in [self.free_energy_quad(), self.kl_quad(), self.j_quad()] {
            quad.validate().map_err(lib)?;
        }
        let separations = self
            .fig1
            .s_grid
            .iter()
            .chain(&self.fig1.panel_d_s)
            .chain(&self.power.s_grid)
            .chain(&self.power.s_values)
            .chain(&self.kl_table.separations);
        for &s in separations {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("separations must be finite and >= 0, got {s}"));
            }
        }
        for &[e, s] in &self.fig2.windows {
            PriorWindow::new(e, s).map_err(lib)?;
        }
        PriorWindow::new(self.free_energy.eps_max, self.free_energy.s_max).map_err(lib)?;
        for &n in self.fig2.n_grid.iter().chain([&self.free_energy.n]) {
            if n < 3 {
                return bad(format!("free-energy sample sizes must be >= 3, got {n}"));
            }
        }
        let sizes = self
            .fig1
            .n_values
            .iter()
            .chain(&self.fig1.panel_d_n)
            .chain(&self.power.n_grid)
            .chain([&self.power.n]);
        for &n in sizes {
            if n == 0 {
                return bad("power sample sizes must be >= 1".into());
            }
        }
        for &e in &self.kl_table.epsilons {
            if !(0.0..1.0).contains(&e) {
                return bad(format!("kl_table epsilons must lie in [0, 1), got {e}"));
            }
        }
        for &[a, b] in &self.zeta.extra_pairs {
            if a == 0 || b == 0 {
                return bad(format!("exponent pairs must be positive, got ({a}, {b})"));
            }
        }
        for &n in &self.zeta.n_grid {
            if !(n >= 3.0) {
                return bad(format!("zeta n_grid entries must be >= 3, got {n}"));
            }
        }
        if !(self.zeta.j_cap > 0.0 && self.zeta.j_cap.is_finite()) {
            return bad(format!("j_cap must be positive, got {}", self.zeta.j_cap));
        }
        Ok(())
    }
}
