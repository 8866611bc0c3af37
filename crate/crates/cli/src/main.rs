mod commands;
mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{Config, ConfigError, Profile, SchemeChoice};

/// Reproduce the one-versus-two source discrimination experiments.
#[derive(Parser, Debug)]
#[command(name = "sourcedisc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Finite-n power of direct imaging and binary SPADE (four panels).
    Fig1,
    /// Centred free-energy quantile bands over the prior windows.
    Fig2,
    /// Exact and leading-order KL informations on a parameter grid.
    KlTable,
    /// Zeta-function poles, free-energy asymptotes and the local statistic.
    Zeta,
    /// Power versus separation at one sample size.
    PowerCurve,
    /// Power versus sample size at fixed separations.
    PowerVsN,
    /// Per-replicate free energies for one window and sample size.
    FreeEnergy,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "SOURCEDISC_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Monte Carlo replicates per direct-imaging power point.
    #[arg(long, global = true)]
    mc_reps: Option<usize>,
    /// Free-energy replicates per (window, n).
    #[arg(long, global = true)]
    replicates: Option<u64>,
    /// Gauss–Legendre nodes per axis at the coarsest refinement level.
    #[arg(long, global = true)]
    quad_nodes: Option<usize>,
    /// Scheme for power-curve and power-vs-n.
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeChoice>,
    /// Sample size for power-curve and free-energy.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Common {
    fn apply(&self, mut c: Config, command: Command) -> Config {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(sigma, epsilon, theta, alpha, seed, profile);
        if self.mc_reps.is_some() {
            c.mc_reps = self.mc_reps;
        }
        if self.replicates.is_some() {
            c.replicates = self.replicates;
        }
        if self.quad_nodes.is_some() {
            c.quad_nodes = self.quad_nodes;
        }
        if let Some(s) = self.scheme {
            c.power.scheme = s;
        }
        if let Some(n) = self.n {
            match command {
                Command::FreeEnergy => c.free_energy.n = n,
                _ => c.power.n = n,
            }
        }
        c.svg |= self.svg;
        c
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let base = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let config = cli.common.apply(base, cli.command).resolved();
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    }
    let config = load_config(cli)?;
    let out: &Path = &cli.common.out_dir;
    let written = match cli.command {
        Command::Fig1 => commands::fig1(&config, out)?,
        Command::Fig2 => commands::fig2(&config, out)?,
        Command::KlTable => commands::kl_table(&config, out)?,
        Command::Zeta => commands::zeta(&config, out)?,
        Command::PowerCurve => commands::power_curve(&config, out)?,
        Command::PowerVsN => commands::power_vs_n_cmd(&config, out)?,
        Command::FreeEnergy => commands::free_energy(&config, out)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<sourcedisc::Error>() {
        Some(sourcedisc::Error::IntegrationNotConverged { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
