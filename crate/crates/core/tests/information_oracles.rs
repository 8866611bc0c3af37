use approx::assert_relative_eq;
use nalgebra::{Matrix2, SymmetricEigen};
use proptest::prelude::*;
use sourcedisc::information::{
    bernoulli_kl, kl_binary_spade_misaligned, kl_direct_imaging, kl_quantum, kl_spade_aligned,
};
use sourcedisc::optics::mode_prob;
use sourcedisc::{GaussianPsf, QuadratureSpec, SceneParams};

fn scene(eps: f64, s: f64, theta: f64) -> SceneParams {
    SceneParams::new(eps, s, theta).unwrap()
}

fn psf(sigma: f64) -> GaussianPsf {
    GaussianPsf::new(sigma).unwrap()
}

fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, tol / 2.0, left, depth - 1) + adaptive_simpson(f, m, b, tol / 2.0, right, depth - 1)
}

/// Plain `∫ p0 ln(p0/p1)` with both sources shifted by `offset`.
fn di_kl_oracle(eps: f64, s: f64, sigma: f64, offset: f64) -> f64 {
    let f = move |x: f64| {
        let p0 = normal_pdf(x, offset, sigma);
        let p1 = (1.0 - eps) * p0 + eps * normal_pdf(x, offset + s, sigma);
        if p0 == 0.0 {
            0.0
        } else {
            p0 * (p0 / p1).ln()
        }
    };
    let (a, b) = (offset - 40.0 * sigma, offset + 40.0 * sigma + s);
    let mut total = 0.0;
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    for k in 0..pieces {
        let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        total += adaptive_simpson(&f, lo, hi, 1e-16, simpson(&f, lo, hi), 40);
    }
    total
}

/// `-<ψ0| ln ρ1 |ψ0>` from a generic symmetric eigensolver.
fn quantum_oracle(eps: f64, s: f64, sigma: f64) -> f64 {
    let c = (-s * s / (8.0 * sigma * sigma)).exp();
    let perp = (1.0 - c * c).sqrt();
    let rho = Matrix2::new(
        (1.0 - eps) + eps * c * c,
        eps * c * perp,
        eps * c * perp,
        eps * perp * perp,
    );
    let eig = SymmetricEigen::new(rho);
    let mut log_rho = Matrix2::zeros();
    for k in 0..2 {
        let v = eig.eigenvectors.column(k);
        log_rho += eig.eigenvalues[k].ln() * v * v.transpose();
    }
    -log_rho[(0, 0)]
}

fn poisson(tau: f64, q: u64) -> f64 {
    let mut p = (-tau).exp();
    for k in 1..=q {
        p *= tau / k as f64;
    }
    p
}

#[test]
fn direct_imaging_matches_adaptive_oracle() {
    let r = kl_direct_imaging(&scene(0.1, 0.25, 0.0), &psf(1.0), &QuadratureSpec::kl_default()).unwrap();
    let oracle = di_kl_oracle(0.1, 0.25, 1.0, 0.0);
    assert_relative_eq!(r.exact, oracle, max_relative = 1e-9);
    assert_relative_eq!(r.leading, 3.125e-4, max_relative = 1e-15);
}

#[test]
fn direct_imaging_oracle_grid() {
    for &(eps, s, sigma) in &[(0.3, 0.1, 1.0), (0.5, 1.5, 2.0), (0.9, 3.0, 0.7), (0.02, 0.01, 1.0)] {
        let r = kl_direct_imaging(&scene(eps, s, 0.0), &psf(sigma), &QuadratureSpec::kl_default()).unwrap();
        assert_relative_eq!(r.exact, di_kl_oracle(eps, s, sigma, 0.0), max_relative = 1e-8);
    }
}

#[test]
fn direct_imaging_ignores_common_offset() {
    let quad = QuadratureSpec::kl_default();
    let a = kl_direct_imaging(&scene(0.3, 0.4, 0.0), &psf(1.0), &quad).unwrap();
    let b = kl_direct_imaging(&scene(0.3, 0.4, 0.3), &psf(1.0), &quad).unwrap();
    assert!((a.exact - b.exact).abs() <= 1e-10 * a.exact);
    assert_relative_eq!(a.exact, di_kl_oracle(0.3, 0.4, 1.0, 0.3), max_relative = 1e-8);
}

#[test]
fn direct_imaging_zero_weight() {
    let r = kl_direct_imaging(&scene(0.0, 0.7, 0.0), &psf(1.0), &QuadratureSpec::kl_default()).unwrap();
    assert_eq!(r.exact, 0.0);
    assert_eq!(r.leading, 0.0);
}

#[test]
fn spade_matches_truncated_mode_sum() {
    let unit = psf(1.0);
    for &(eps, s) in &[(0.3, 0.2), (0.05, 1.0), (0.7, 2.5)] {
        let total: f64 = (0..60).map(|q| mode_prob(q, s, &unit)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // under the aligned null every photon is in q = 0
        let p1_fund = (1.0 - eps) + eps * mode_prob(0, s, &unit);
        let r = kl_spade_aligned(&scene(eps, s, 0.0), &unit).unwrap();
        assert_relative_eq!(r.exact, -p1_fund.ln(), max_relative = 1e-13);
    }
}

#[test]
fn quantum_matches_eigensolver() {
    let r = kl_quantum(&scene(0.3, 0.5, 0.0), &psf(1.0)).unwrap();
    assert_relative_eq!(r.exact, quantum_oracle(0.3, 0.5, 1.0), max_relative = 1e-12);
    // the ε² ln(1/ε) remainder is far from negligible at ε = 0.3
    let c2 = (-0.25f64 / 4.0).exp();
    assert_relative_eq!(r.leading, 0.3 * (1.0 - c2), max_relative = 1e-14);
    assert_relative_eq!(r.ratio().unwrap(), 2.008_998_925_467_42, max_relative = 1e-10);
    for &(eps, s) in &[(0.01, 0.3), (0.5, 1.0), (0.9, 2.0), (0.2, 4.0)] {
        let r = kl_quantum(&scene(eps, s, 0.0), &psf(1.0)).unwrap();
        assert_relative_eq!(r.exact, quantum_oracle(eps, s, 1.0), max_relative = 1e-10);
    }
}

#[test]
fn quantum_limits() {
    assert_eq!(kl_quantum(&scene(0.0, 0.5, 0.0), &psf(1.0)).unwrap().exact, 0.0);
    let far = kl_quantum(&scene(0.3, 60.0, 0.0), &psf(1.0)).unwrap();
    assert_relative_eq!(far.exact, 0.356_674_943_938_732_4, max_relative = 1e-12);
}

#[test]
fn quantum_dominates_spade() {
    for &(eps, s) in &[(0.1, 0.1), (0.3, 0.5), (0.6, 1.2)] {
        let q = kl_quantum(&scene(eps, s, 0.0), &psf(1.0)).unwrap().exact;
        let sp = kl_spade_aligned(&scene(eps, s, 0.0), &psf(1.0)).unwrap().exact;
        assert!(q >= sp * (1.0 - 1e-12), "{q} < {sp}");
    }
}

#[test]
fn binary_spade_second_order_oracle() {
    let r = kl_binary_spade_misaligned(&scene(0.3, 0.05, 0.1), &psf(1.0)).unwrap();
    let p0 = (-0.0025f64).exp();
    let ps = (-(0.05f64 - 0.025).powi(2)).exp();
    let p1 = 0.7 * p0 + 0.3 * ps;
    let direct = p0 * (p0 / p1).ln() + (1.0 - p0) * ((1.0 - p0) / (1.0 - p1)).ln();
    assert_relative_eq!(r.exact, direct, max_relative = 1e-6);
    let delta = p1 - p0;
    assert_relative_eq!(r.leading, delta * delta / (2.0 * p0 * (1.0 - p0)), max_relative = 1e-9);
    // 1 - p0 is only 2.5e-3 here, so the quadratic term is a loose proxy
    assert_relative_eq!(r.ratio().unwrap(), 1.180_407_477_226_22, max_relative = 1e-6);
}

#[test]
fn leading_terms_take_over_along_shrinking_sequence() {
    let unit = psf(1.0);
    let quad = QuadratureSpec::kl_default();
    let mut prev = [f64::INFINITY; 4];
    for &t in &[0.1, 0.05, 0.025] {
        let sc = scene(t * t, t, 0.0);
        let ratios = [
            kl_direct_imaging(&sc, &unit, &quad).unwrap().ratio().unwrap(),
            kl_spade_aligned(&sc, &unit).unwrap().ratio().unwrap(),
            kl_quantum(&sc, &unit).unwrap().ratio().unwrap(),
            kl_binary_spade_misaligned(&scene(t * t, t, 0.1), &unit)
                .unwrap()
                .ratio()
                .unwrap(),
        ];
        for (k, r) in ratios.iter().enumerate() {
            let err = (r - 1.0).abs();
            assert!(err < prev[k], "scheme {k} at t={t}: {r}");
            prev[k] = err;
        }
    }
    assert!(prev.iter().all(|&e| e < 0.02), "{prev:?}");
}

#[test]
fn binary_spade_blind_spot_and_zero_weight() {
    assert_eq!(
        kl_binary_spade_misaligned(&scene(0.3, 0.2, 0.1), &psf(1.0))
            .unwrap()
            .exact,
        0.0
    );
    assert_eq!(
        kl_binary_spade_misaligned(&scene(0.0, 0.3, 0.1), &psf(1.0))
            .unwrap()
            .exact,
        0.0
    );
}

#[test]
fn data_processing_against_full_mode_distribution() {
    let unit = psf(1.0);
    for &eps in &[0.1, 0.3, 0.8] {
        for &s in &[0.05, 0.2, 0.5, 1.0, 2.0] {
            for &theta in &[0.05, 0.1, 0.4] {
                let t0 = theta * theta / 4.0;
                let ts = (s - theta) * (s - theta) / 4.0;
                let full: f64 = (0..80)
                    .map(|q| {
                        let a = poisson(t0, q);
                        let b = (1.0 - eps) * a + eps * poisson(ts, q);
                        if a == 0.0 {
                            0.0
                        } else {
                            a * (a / b).ln()
                        }
                    })
                    .sum();
                let coarse = kl_binary_spade_misaligned(&scene(eps, s, theta), &unit).unwrap().exact;
                assert!(
                    coarse <= full + 1e-15,
                    "eps={eps} s={s} theta={theta}: {coarse} > {full}"
                );
            }
        }
    }
}

#[test]
fn bernoulli_kl_edges() {
    assert_relative_eq!(
        bernoulli_kl(0.0, 0.5).unwrap(),
        std::f64::consts::LN_2,
        max_relative = 1e-15
    );
    assert_relative_eq!(
        bernoulli_kl(0.5, 0.25).unwrap(),
        0.143_841_036_225_890_46,
        max_relative = 1e-14
    );
    assert!(bernoulli_kl(0.5, 0.0).is_err());
    assert!(bernoulli_kl(0.5, 1.0).is_err());
    assert_eq!(bernoulli_kl(1.0, 1.0).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_covariance(
        eps in 0.01f64..0.9,
        s in 0.02f64..2.0,
        theta in 0.02f64..0.8,
        c in 0.1f64..10.0,
    ) {
        let base = scene(eps, s, theta);
        let scaled = scene(eps, c * s, c * theta);
        let (p, pc) = (psf(1.0), psf(c));
        let quad = QuadratureSpec::kl_default();
        let pairs = [
            (kl_direct_imaging(&base, &p, &quad).unwrap(), kl_direct_imaging(&scaled, &pc, &quad).unwrap()),
            (kl_spade_aligned(&base, &p).unwrap(), kl_spade_aligned(&scaled, &pc).unwrap()),
            (kl_quantum(&base, &p).unwrap(), kl_quantum(&scaled, &pc).unwrap()),
            (
                kl_binary_spade_misaligned(&base, &p).unwrap(),
                kl_binary_spade_misaligned(&scaled, &pc).unwrap(),
            ),
        ];
        for (a, b) in pairs {
            prop_assert!((a.exact - b.exact).abs() <= 1e-10 * a.exact.max(1e-300), "{} vs {}", a.exact, b.exact);
            prop_assert!((a.leading - b.leading).abs() <= 1e-10 * a.leading.max(1e-300));
        }
    }

    #[test]
    fn kls_are_nonnegative(eps in 0.0f64..0.95, s in 0.0f64..3.0, theta in 0.01f64..1.0) {
        let sc = scene(eps, s, theta);
        let p = psf(1.0);
        prop_assert!(kl_direct_imaging(&sc, &p, &QuadratureSpec::kl_default()).unwrap().exact >= 0.0);
        prop_assert!(kl_spade_aligned(&sc, &p).unwrap().exact >= 0.0);
        prop_assert!(kl_quantum(&sc, &p).unwrap().exact >= 0.0);
        prop_assert!(kl_binary_spade_misaligned(&sc, &p).unwrap().exact >= 0.0);
    }

    #[test]
    fn bernoulli_kl_matches_naive(p in 0.001f64..0.999, q in 0.001f64..0.999) {
        let naive = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        let v = bernoulli_kl(p, q).unwrap();
        prop_assert!((v - naive).abs() <= 1e-12 * naive.abs().max(1e-3));
    }
}
