//! Privacy accountants for iterative training.
//!
//! DP-SGD steps are accounted with Rényi DP of the sampled Gaussian mechanism
//! and converted to `(epsilon, delta)` with
//! `epsilon = min_alpha [steps * RDP(alpha) + ln(1/delta) / (alpha - 1)]`.
//! Teacher-vote queries use the data-independent strong-composition bound.

use crate::error::{Error, Result};

use super::PrivacySpec;

/// Rényi orders searched by [`sgd_accountant_epsilon`].
pub const RDP_ORDERS: [f64; 65] = {
    let mut orders = [0.0; 65];
    orders[0] = 1.25;
    orders[1] = 1.5;
    let mut i = 2;
    while i < 65 {
        orders[i] = i as f64;
        i += 1;
    }
    orders
};

/// Search interval of [`calibrate_noise_multiplier`].
pub const SIGMA_MIN: f64 = 0.01;
pub const SIGMA_MAX: f64 = 1e6;

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn log_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

fn log_erfc(x: f64) -> f64 {
    if x < 25.0 {
        return libm::erfc(x).ln();
    }
    // Asymptotic expansion; erfc underflows past here.
    let x2 = x * x;
    -x2 - x.ln() - 0.5 * std::f64::consts::PI.ln() + (1.0 - 0.5 / x2 + 0.75 / (x2 * x2)).ln()
}

fn ln_binomial_int(n: u32, k: u32) -> f64 {
    (0..k)
        .map(|m| ((n - m) as f64).ln() - ((m + 1) as f64).ln())
        .sum()
}

fn log_a_int(q: f64, sigma: f64, alpha: u32) -> f64 {
    let two_var = 2.0 * sigma * sigma;
    (0..=alpha).fold(f64::NEG_INFINITY, |acc, k| {
        let kf = k as f64;
        let term = ln_binomial_int(alpha, k)
            + (alpha - k) as f64 * (1.0 - q).ln()
            + kf * q.ln()
            + (kf * kf - kf) / two_var;
        log_add(acc, term)
    })
}

fn log_a_frac(q: f64, sigma: f64, alpha: f64) -> f64 {
    let mut log_a0 = f64::NEG_INFINITY;
    let mut log_a1 = f64::NEG_INFINITY;
    let z0 = sigma * sigma * (1.0 / q - 1.0).ln() + 0.5;
    let two_var = 2.0 * sigma * sigma;
    let sqrt2_sigma = std::f64::consts::SQRT_2 * sigma;

    // Generalized binomial coefficient C(alpha, i), tracked as sign and log-magnitude.
    let mut log_coef = 0.0;
    let mut positive = true;
    for i in 0..10_000u32 {
        if i > 0 {
            let factor = (alpha - (i - 1) as f64) / i as f64;
            if factor < 0.0 {
                positive = !positive;
            }
            log_coef += factor.abs().ln();
        }
        let fi = i as f64;
        let j = alpha - fi;
        let log_t0 = log_coef + fi * q.ln() + j * (1.0 - q).ln();
        let log_t1 = log_coef + j * q.ln() + fi * (1.0 - q).ln();
        let log_e0 = 0.5f64.ln() + log_erfc((fi - z0) / sqrt2_sigma);
        let log_e1 = 0.5f64.ln() + log_erfc((z0 - j) / sqrt2_sigma);
        let log_s0 = log_t0 + (fi * fi - fi) / two_var + log_e0;
        let log_s1 = log_t1 + (j * j - j) / two_var + log_e1;
        if positive {
            log_a0 = log_add(log_a0, log_s0);
            log_a1 = log_add(log_a1, log_s1);
        } else {
            log_a0 = log_sub(log_a0, log_s0);
            log_a1 = log_sub(log_a1, log_s1);
        }
        if log_s0.max(log_s1) < -30.0 {
            return log_add(log_a0, log_a1);
        }
    }
    f64::INFINITY
}

/// Rényi divergence of order `alpha` of one step of the sampled Gaussian
/// mechanism with sampling rate `q` and noise multiplier `sigma`.
pub fn subsampled_gaussian_rdp(q: f64, sigma: f64, alpha: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return alpha / (2.0 * sigma * sigma);
    }
    let log_a = if alpha.fract() == 0.0 {
        log_a_int(q, sigma, alpha as u32)
    } else {
        log_a_frac(q, sigma, alpha)
    };
    (log_a / (alpha - 1.0)).max(0.0)
}

/// Epsilon spent by `steps` DP-SGD steps at the given noise multiplier and sampling rate.
pub fn sgd_accountant_epsilon(
    noise_multiplier: f64,
    sampling_rate: f64,
    steps: u64,
    delta: f64,
) -> Result<f64> {
    if !(noise_multiplier > 0.0) {
        return Err(Error::Input(format!(
            "noise multiplier must be positive, got {noise_multiplier}"
        )));
    }
    if !(sampling_rate > 0.0 && sampling_rate <= 1.0) {
        return Err(Error::Input(format!(
            "sampling rate must lie in (0, 1], got {sampling_rate}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if steps == 0 {
        return Ok(0.0);
    }
    let log_inv_delta = (1.0 / delta).ln();
    Ok(RDP_ORDERS
        .iter()
        .map(|&alpha| {
            steps as f64 * subsampled_gaussian_rdp(sampling_rate, noise_multiplier, alpha)
                + log_inv_delta / (alpha - 1.0)
        })
        .fold(f64::INFINITY, f64::min))
}

/// Smallest noise multiplier (to within 1e-3) for which the DP-SGD accountant stays within `target`.
pub fn calibrate_noise_multiplier(
    target: PrivacySpec,
    sampling_rate: f64,
    steps: u64,
) -> Result<f64> {
    let epsilon = target.epsilon();
    if !epsilon.is_finite() {
        return Err(Error::Calibration("target epsilon must be finite".into()));
    }
    let spent = |sigma: f64| sgd_accountant_epsilon(sigma, sampling_rate, steps, target.delta());
    if spent(SIGMA_MIN)? <= epsilon {
        return Ok(SIGMA_MIN);
    }
    if spent(SIGMA_MAX)? > epsilon {
        return Err(Error::Calibration(format!(
            "no noise multiplier up to {SIGMA_MAX} reaches epsilon {epsilon} \
             (delta {}, rate {sampling_rate}, {steps} steps)",
            target.delta()
        )));
    }
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    while hi - lo > 1e-4 * lo.max(1e-2) {
        let mid = (lo * hi).sqrt();
        if spent(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Strong-composition bound for `query_count` queries that are each `per_query_epsilon`-DP:
/// `eps0 * sqrt(2 T ln(1/delta)) + T * eps0 * (exp(eps0) - 1)`.
pub fn pate_accountant_epsilon(
    query_count: u64,
    per_query_epsilon: f64,
    delta: f64,
) -> Result<f64> {
    if !(per_query_epsilon > 0.0) {
        return Err(Error::Input(format!(
            "per-query epsilon must be positive, got {per_query_epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let t = query_count as f64;
    Ok(per_query_epsilon * (2.0 * t * (1.0 / delta).ln()).sqrt()
        + t * per_query_epsilon * per_query_epsilon.exp_m1())
}
