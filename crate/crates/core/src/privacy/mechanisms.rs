use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Budget(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

fn check_sensitivity(sensitivity: f64) -> Result<()> {
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::Input(format!(
            "sensitivity must be positive and finite, got {sensitivity}"
        )));
    }
    Ok(())
}

fn check_values(values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite value {} at index {i}",
            values[i]
        )));
    }
    Ok(())
}

/// One draw from Laplace(0, scale), as the difference of two unit exponentials.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    scale * (a - b)
}

/// Adds i.i.d. Laplace(0, sensitivity / epsilon) noise to every value.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    values: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    check_sensitivity(sensitivity)?;
    check_values(values)?;
    if epsilon.is_infinite() {
        return Ok(values.to_vec());
    }
    let scale = sensitivity / epsilon;
    Ok(values
        .iter()
        .map(|v| v + sample_laplace(scale, rng))
        .collect())
}

/// Noise standard deviation of the classical Gaussian mechanism,
/// `sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon`.
///
/// Returns 0 for an infinite epsilon.
pub fn gaussian_sigma(sensitivity: f64, epsilon: f64, delta: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_sensitivity(sensitivity)?;
    if delta <= 0.0 {
        return Err(Error::Budget(
            "the Gaussian mechanism needs delta > 0; use the Laplace mechanism for pure DP".into(),
        ));
    }
    if delta >= 1.0 {
        return Err(Error::Budget(format!("delta must be below 1, got {delta}")));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    Ok(sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Adds i.i.d. N(0, sigma^2) noise with sigma from [`gaussian_sigma`].
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    values: &[f64],
    sensitivity: f64,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_values(values)?;
    if epsilon.is_infinite() {
        check_sensitivity(sensitivity)?;
        return Ok(values.to_vec());
    }
    let sigma = gaussian_sigma(sensitivity, epsilon, delta)?;
    Ok(values
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * z
        })
        .collect())
}

/// Picks index `i` with probability proportional to `exp(epsilon * score_i / (2 * sensitivity))`.
///
/// With an infinite epsilon this is the argmax, ties resolved to the lowest index.
pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Input(
            "exponential mechanism needs at least one candidate".into(),
        ));
    }
    check_values(scores)?;
    check_epsilon(epsilon)?;
    check_sensitivity(sensitivity)?;

    let (best, max) =
        scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    if epsilon.is_infinite() {
        return Ok(best);
    }

    let factor = epsilon / (2.0 * sensitivity);
    let weights: Vec<f64> = scores.iter().map(|s| (factor * (s - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return Ok(i);
        }
        target -= w;
    }
    // Rounding left a sliver of mass past the last bucket.
    Ok(weights.iter().rposition(|w| *w > 0.0).unwrap_or(best))
}
