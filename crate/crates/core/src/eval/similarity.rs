use crate::domain::{
    discretize, marginal, mutual_information, to_distribution, tvd_similarity, Table,
};
use crate::error::{input, Result};

fn discretized_pair(real: &Table, synth: &Table, bins: usize) -> Result<(Table, Table)> {
    if real.schema() != synth.schema() {
        return input("real and synthetic tables must share a schema");
    }
    if real.n_rows() == 0 || synth.n_rows() == 0 {
        return input("similarity needs non-empty tables");
    }
    Ok((
        discretize(real, bins)?.table,
        discretize(synth, bins)?.table,
    ))
}

/// Mean over columns of `1 - TVD` between the binned 1-way marginals.
pub fn marginal_similarity(real: &Table, synth: &Table, bins: usize) -> Result<f64> {
    let (r, s) = discretized_pair(real, synth, bins)?;
    let mut total = 0.0;
    for j in 0..r.n_cols() {
        let p = to_distribution(&marginal(&r, &[j])?);
        let q = to_distribution(&marginal(&s, &[j])?);
        total += tvd_similarity(&p, &q)?;
    }
    Ok(total / r.n_cols() as f64)
}

/// Relative agreement of two mutual-information values,
/// `1 - |a - b| / max(a, b, 1e-9)` clamped to `[0, 1]`.
pub fn mi_agreement(a: f64, b: f64) -> f64 {
    (1.0 - (a - b).abs() / a.max(b).max(1e-9)).clamp(0.0, 1.0)
}

/// Mean over column pairs of [`mi_agreement`] between real and synthetic
/// mutual information (in bits) of the binned columns.
pub fn mi_similarity(real: &Table, synth: &Table, bins: usize) -> Result<f64> {
    let (r, s) = discretized_pair(real, synth, bins)?;
    let d = r.n_cols();
    if d < 2 {
        return input("mutual-information similarity needs at least two columns");
    }
    let mut total = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            total += mi_agreement(
                mutual_information(&r, i, j, &[])?,
                mutual_information(&s, i, j, &[])?,
            );
        }
    }
    Ok(total / (d * (d - 1) / 2) as f64)
}
