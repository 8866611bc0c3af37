//! Small numerically careful helpers shared across modules.

/// `ln(Σ exp(v))` using the max-shift form. Returns `-inf` for an empty or
/// all-`-inf` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + iter.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(Σ w_i exp(v_i))` for strictly positive weights, folded in log space.
pub fn weighted_log_sum_exp(log_values: &[f64], log_weights: &[f64]) -> f64 {
    assert_eq!(log_values.len(), log_weights.len());
    log_sum_exp(log_values.iter().zip(log_weights).map(|(v, w)| v + w))
}

/// `z - ln(1 + z)` for `z > -1`, accurate when `|z|` is small.
///
/// This is the pointwise KL integrand after adding the zero-mean first-order
/// term back in, so it is nonnegative and free of cancellation.
pub fn x_minus_log1p(z: f64) -> f64 {
    if z.abs() < 0.05 {
        // z^2/2 - z^3/3 + z^4/4 - ...
        let mut term = z * z;
        let mut sum = 0.0;
        let mut k = 2.0;
        loop {
            let contribution = term / k;
            sum += contribution;
            if contribution.abs() <= 1e-18 * sum.abs() {
                break;
            }
            term *= -z;
            k += 1.0;
        }
        sum
    } else {
        z - z.ln_1p()
    }
}

/// Log of the binomial mass `C(n,k) p^k (1-p)^(n-k)`, given `ln p` and `ln(1-p)`.
///
/// Zero-probability endpoints are handled without forming `0 * -inf`.
pub fn ln_binomial_pmf(n: u64, k: u64, ln_p: f64, ln_q: f64) -> f64 {
    debug_assert!(k <= n);
    let mut out = statrs::function::factorial::ln_binomial(n, k);
    if k > 0 {
        out += k as f64 * ln_p;
    }
    if n > k {
        out += (n - k) as f64 * ln_q;
    }
    out
}
