//! One function per subcommand; each returns the files it wrote.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use sourcedisc::bayes::{free_energy_batch, quantile_summary, PriorWindow};
use sourcedisc::information::{kl_binary_spade_misaligned, kl_direct_imaging, kl_quantum, kl_spade_aligned, KlResult};
use sourcedisc::singular::{
    free_energy_asymptote, j_statistic, local_shift_coefficient, zeta_pole_structure, LocalSign, MonomialKl,
    PoleStructure,
};
use sourcedisc::testing::{blind_spot_separation, power_table, power_vs_n, PowerPoint, Scheme};
use sourcedisc::SceneParams;

use crate::config::Config;
use crate::output::{ensure_dir, header, num, write_text, Table};
use crate::svg::{Plot, Series, PALETTE};

const POWER_COLUMNS: [&str; 10] = [
    "scheme", "s", "n", "power", "std_err", "alpha", "theta", "epsilon", "sigma", "seed",
];

fn power_row(p: &PowerPoint, cfg: &Config) -> Vec<String> {
    vec![
        p.scheme.label().to_string(),
        num(p.s),
        p.n.to_string(),
        num(p.power),
        num(p.std_err),
        num(cfg.alpha),
        num(cfg.theta),
        num(cfg.epsilon),
        num(cfg.sigma),
        cfg.seed.to_string(),
    ]
}

fn power_table_of(points: &[PowerPoint], cfg: &Config) -> Table {
    let mut t = Table::new(&POWER_COLUMNS);
    for p in points {
        t.push(power_row(p, cfg));
    }
    t
}

fn progress(msg: impl AsRef<str>) {
    eprintln!("[sourcedisc] {}", msg.as_ref());
}

/// Both schemes over an `n × s` grid, `n`-major, each scheme in one call.
fn both_schemes(cfg: &Config, schemes: &[Scheme], n_grid: &[usize], s_grid: &[f64]) -> Result<Vec<Vec<PowerPoint>>> {
    let psf = cfg.psf();
    let scene = cfg.scene();
    schemes
        .iter()
        .map(|&scheme| {
            progress(format!(
                "{scheme}: {} x {} grid, {} replicates",
                n_grid.len(),
                s_grid.len(),
                cfg.mc_reps()
            ));
            Ok(power_table(
                scheme,
                n_grid,
                s_grid,
                &scene,
                &psf,
                cfg.alpha,
                cfg.mc_reps(),
                cfg.seed,
            )?)
        })
        .collect()
}

pub fn fig1(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let f = &cfg.fig1;
    let schemes = [Scheme::DirectImaging, Scheme::BinarySpade];
    let tables = both_schemes(cfg, &schemes, &f.n_values, &f.s_grid)?;
    let ns = f.s_grid.len();
    let letters = "abcdefghijklmnopqrstuvwxyz".as_bytes();
    let s_star = blind_spot_separation(cfg.theta);
    let mut written = Vec::new();
    for (a, &n) in f.n_values.iter().enumerate() {
        let letter = letters[a % 26] as char;
        let points: Vec<PowerPoint> = tables
            .iter()
            .flat_map(|t| t[a * ns..(a + 1) * ns].iter().copied())
            .collect();
        let path = out.join(format!("fig1_panel_{letter}.csv"));
        let title = vec![format!("fig1 panel {letter}: power versus separation at n = {n}")];
        power_table_of(&points, cfg).write(&path, &header(&title, cfg))?;
        written.push(path);
        if cfg.svg {
            let plot = Plot {
                title: format!("({letter}) n = {n}"),
                x_label: "separation s".into(),
                y_label: "power".into(),
                log_x: false,
                series: curve_series(&points, &schemes, |p| p.s),
                marker: Some((s_star, format!("s* = {}", num(s_star)))),
                level: Some(cfg.alpha),
            };
            written.push(write_text(
                out.join(format!("fig1_panel_{letter}.svg")),
                &plot.render(),
            )?);
        }
    }

    let psf = cfg.psf();
    let scene = cfg.scene();
    let mut points = Vec::new();
    for scheme in schemes {
        progress(format!("{scheme}: power versus n"));
        points.extend(power_vs_n(
            scheme,
            &f.panel_d_n,
            &f.panel_d_s,
            &scene,
            &psf,
            cfg.alpha,
            cfg.mc_reps(),
            cfg.seed,
        )?);
    }
    let letter = letters[f.n_values.len() % 26] as char;
    let path = out.join(format!("fig1_panel_{letter}.csv"));
    let title = vec![format!("fig1 panel {letter}: power versus sample size")];
    power_table_of(&points, cfg).write(&path, &header(&title, cfg))?;
    written.push(path);
    if cfg.svg {
        let mut series = Vec::new();
        for (k, scheme) in schemes.iter().enumerate() {
            for (j, &s) in f.panel_d_s.iter().enumerate() {
                series.push(Series {
                    label: format!("{scheme} s={}", num(s)),
                    points: points
                        .iter()
                        .filter(|p| p.scheme == *scheme && p.s == s)
                        .map(|p| (p.n as f64, p.power))
                        .collect(),
                    color: PALETTE[j % PALETTE.len()],
                    dashed: k == 1,
                });
            }
        }
        let plot = Plot {
            title: format!("({letter}) power versus n"),
            x_label: "photons n".into(),
            y_label: "power".into(),
            log_x: true,
            series,
            marker: None,
            level: Some(cfg.alpha),
        };
        written.push(write_text(
            out.join(format!("fig1_panel_{letter}.svg")),
            &plot.render(),
        )?);
    }
    Ok(written)
}

fn curve_series(points: &[PowerPoint], schemes: &[Scheme], x: impl Fn(&PowerPoint) -> f64) -> Vec<Series> {
    schemes
        .iter()
        .enumerate()
        .map(|(k, scheme)| Series {
            label: scheme.label().into(),
            points: points
                .iter()
                .filter(|p| p.scheme == *scheme)
                .map(|p| (x(p), p.power))
                .collect(),
            color: PALETTE[k],
            dashed: false,
        })
        .collect()
}

pub fn fig2(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let psf = cfg.psf();
    let quad = cfg.free_energy_quad();
    let reps = cfg.replicates();
    let mut written = Vec::new();
    for window in cfg.windows() {
        let mut table = Table::new(&[
            "n",
            "q10_exact",
            "median_exact",
            "q90_exact",
            "q10_local",
            "median_local",
            "q90_local",
            "replicates",
            "seed",
        ]);
        let mut bands = Vec::new();
        for &n in &cfg.fig2.n_grid {
            progress(format!(
                "window ({}, {}): n = {n}, {reps} replicates",
                num(window.eps_max),
                num(window.s_max)
            ));
            let records = free_energy_batch(n, &window, &psf, &quad, reps, cfg.seed)?;
            let exact: Vec<f64> = records.iter().map(|r| r.centered_exact).collect();
            let local: Vec<f64> = records.iter().map(|r| r.centered_local).collect();
            let (e, l) = (quantile_summary(&exact)?, quantile_summary(&local)?);
            table.push(vec![
                n.to_string(),
                num(e.q10),
                num(e.median),
                num(e.q90),
                num(l.q10),
                num(l.median),
                num(l.q90),
                reps.to_string(),
                cfg.seed.to_string(),
            ]);
            bands.push((n as f64, e, l));
        }
        let stem = window_stem(&window);
        let path = out.join(format!("{stem}.csv"));
        let title = vec![
            format!(
                "fig2 centred free energy, window eps_max = {}, s_max = {}",
                num(window.eps_max),
                num(window.s_max)
            ),
            format!("d_max_lead = {}", num(window.d_max_lead(&psf))),
        ];
        table.write(&path, &header(&title, cfg))?;
        written.push(path);
        if cfg.svg {
            let line = |label: &str, k: usize, dashed: bool, f: &dyn Fn(&(f64, _, _)) -> f64| Series {
                label: label.into(),
                points: bands.iter().map(|b| (b.0, f(b))).collect(),
                color: PALETTE[k],
                dashed,
            };
            let plot = Plot {
                title: format!("window ({}, {})", num(window.eps_max), num(window.s_max)),
                x_label: "photons n".into(),
                y_label: "centred free energy (nats)".into(),
                log_x: true,
                series: vec![
                    line("exact median", 0, false, &|b| b.1.median),
                    line("exact 10%", 0, true, &|b| b.1.q10),
                    line("exact 90%", 0, true, &|b| b.1.q90),
                    line("local median", 1, false, &|b| b.2.median),
                    line("local 10%", 1, true, &|b| b.2.q10),
                    line("local 90%", 1, true, &|b| b.2.q90),
                ],
                marker: None,
                level: None,
            };
            written.push(write_text(out.join(format!("{stem}.svg")), &plot.render())?);
        }
    }
    Ok(written)
}

fn window_stem(w: &PriorWindow) -> String {
    format!("fig2_window_{}_{}", num(w.eps_max), num(w.s_max))
}

fn kl_cells(r: &KlResult) -> [String; 3] {
    [num(r.exact), num(r.leading), num(r.ratio().unwrap_or(f64::NAN))]
}

pub fn kl_table(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let psf = cfg.psf();
    let quad = cfg.kl_quad();
    let mut table = Table::new(&[
        "epsilon",
        "s",
        "theta",
        "sigma",
        "di_exact",
        "di_leading",
        "di_ratio",
        "spade_exact",
        "spade_leading",
        "spade_ratio",
        "quantum_exact",
        "quantum_leading",
        "quantum_ratio",
        "bspade_exact",
        "bspade_leading",
        "bspade_ratio",
    ]);
    let k = &cfg.kl_table;
    for &theta in &k.thetas {
        for &eps in &k.epsilons {
            for &s in &k.separations {
                let scene = SceneParams::new(eps, s, theta)?;
                let mut row = vec![num(eps), num(s), num(theta), num(cfg.sigma)];
                row.extend(kl_cells(&kl_direct_imaging(&scene, &psf, &quad)?));
                row.extend(kl_cells(&kl_spade_aligned(&scene, &psf)?));
                row.extend(kl_cells(&kl_quantum(&scene, &psf)?));
                row.extend(kl_cells(&kl_binary_spade_misaligned(&scene, &psf)?));
                table.push(row);
            }
        }
    }
    let path = out.join("kl_table.csv");
    let title = vec!["exact and leading-order KL informations (nats)".to_string()];
    table.write(&path, &header(&title, cfg))?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct PoleReport {
    label: String,
    a_eps: u32,
    a_s: u32,
    lambda: String,
    lambda_value: f64,
    multiplicity: u32,
}

#[derive(Serialize)]
struct AsymptoteRow {
    n: f64,
    direct_imaging: f64,
    spade: f64,
    spade_minus_direct_imaging: f64,
    ln_ln_n: f64,
}

#[derive(Serialize)]
struct LocalRow {
    xi: f64,
    j_minus: f64,
    j_plus: f64,
}

#[derive(Serialize)]
struct LocalReport {
    theta: f64,
    sigma: f64,
    a_theta: f64,
    cap: f64,
    rows: Vec<LocalRow>,
}

#[derive(Serialize)]
struct ZetaReport {
    config: Config,
    poles: Vec<PoleReport>,
    asymptotes: Vec<AsymptoteRow>,
    local_statistic: LocalReport,
}

fn pole_report(label: &str, m: MonomialKl) -> PoleReport {
    let p = zeta_pole_structure(&m);
    PoleReport {
        label: label.into(),
        a_eps: m.a_eps,
        a_s: m.a_s,
        lambda: format!("{}", p.lambda),
        lambda_value: p.lambda_f64(),
        multiplicity: p.multiplicity,
    }
}

pub fn zeta(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut poles = vec![
        pole_report("direct_imaging", MonomialKl::DIRECT_IMAGING),
        pole_report("spade", MonomialKl::SPADE),
    ];
    for &[a, b] in &cfg.zeta.extra_pairs {
        poles.push(pole_report("user", MonomialKl::new(a, b)?));
    }
    let di: PoleStructure = zeta_pole_structure(&MonomialKl::DIRECT_IMAGING);
    let sp: PoleStructure = zeta_pole_structure(&MonomialKl::SPADE);
    let asymptotes = cfg
        .zeta
        .n_grid
        .iter()
        .map(|&n| {
            let (d, s) = (free_energy_asymptote(n, &di)?, free_energy_asymptote(n, &sp)?);
            Ok(AsymptoteRow {
                n,
                direct_imaging: d,
                spade: s,
                spade_minus_direct_imaging: s - d,
                ln_ln_n: n.ln().ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let quad = cfg.j_quad();
    let rows = cfg
        .zeta
        .xi_grid
        .iter()
        .map(|&xi| {
            Ok(LocalRow {
                xi,
                j_minus: j_statistic(xi, cfg.zeta.j_cap, LocalSign::Minus, &quad)?,
                j_plus: j_statistic(xi, cfg.zeta.j_cap, LocalSign::Plus, &quad)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ZetaReport {
        config: cfg.clone(),
        poles,
        asymptotes,
        local_statistic: LocalReport {
            theta: cfg.theta,
            sigma: cfg.sigma,
            a_theta: local_shift_coefficient(cfg.theta, &cfg.psf()),
            cap: cfg.zeta.j_cap,
            rows,
        },
    };
    let path = out.join("zeta.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    Ok(vec![write_text(path, &text)?])
}

pub fn power_curve(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let p = &cfg.power;
    let schemes = p.scheme.schemes();
    let points: Vec<PowerPoint> = both_schemes(cfg, &schemes, &[p.n], &p.s_grid)?
        .into_iter()
        .flatten()
        .collect();
    let path = out.join("power_curve.csv");
    let title = vec![format!("power versus separation at n = {}", p.n)];
    power_table_of(&points, cfg).write(&path, &header(&title, cfg))?;
    let mut written = vec![path];
    if cfg.svg {
        let s_star = blind_spot_separation(cfg.theta);
        let plot = Plot {
            title: format!("n = {}", p.n),
            x_label: "separation s".into(),
            y_label: "power".into(),
            log_x: false,
            series: curve_series(&points, &schemes, |q| q.s),
            marker: Some((s_star, format!("s* = {}", num(s_star)))),
            level: Some(cfg.alpha),
        };
        written.push(write_text(out.join("power_curve.svg"), &plot.render())?);
    }
    Ok(written)
}

pub fn power_vs_n_cmd(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let p = &cfg.power;
    let psf = cfg.psf();
    let scene = cfg.scene();
    let mut points = Vec::new();
    for scheme in p.scheme.schemes() {
        progress(format!("{scheme}: power versus n"));
        points.extend(power_vs_n(
            scheme,
            &p.n_grid,
            &p.s_values,
            &scene,
            &psf,
            cfg.alpha,
            cfg.mc_reps(),
            cfg.seed,
        )?);
    }
    let path = out.join("power_vs_n.csv");
    let title = vec!["power versus sample size".to_string()];
    power_table_of(&points, cfg).write(&path, &header(&title, cfg))?;
    Ok(vec![path])
}

pub fn free_energy(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let fe = &cfg.free_energy;
    let window = PriorWindow::new(fe.eps_max, fe.s_max)?;
    let psf = cfg.psf();
    progress(format!("n = {}, {} replicates", fe.n, cfg.replicates()));
    let records = free_energy_batch(fe.n, &window, &psf, &cfg.free_energy_quad(), cfg.replicates(), cfg.seed)?;
    let mut table = Table::new(&[
        "n",
        "f_exact",
        "f_local",
        "centered_exact",
        "centered_local",
        "replicate_id",
        "seed",
    ]);
    for r in &records {
        table.push(vec![
            r.n.to_string(),
            num(r.f_exact),
            num(r.f_local),
            num(r.centered_exact),
            num(r.centered_local),
            r.replicate_id.to_string(),
            r.seed.to_string(),
        ]);
    }
    let path = out.join("free_energy.csv");
    let title = vec![
        format!(
            "free energies, window eps_max = {}, s_max = {}",
            num(window.eps_max),
            num(window.s_max)
        ),
        format!("d_max_lead = {}", num(window.d_max_lead(&psf))),
    ];
    table.write(&path, &header(&title, cfg))?;
    Ok(vec![path])
}
