use super::{marginal, MarginalTable, Table};
use crate::error::{input, Result};

/// Plug-in Shannon entropy, in bits, of a non-negative count vector (0 log 0 = 0).
pub fn entropy_bits(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Conditional mutual information `I(L; R | G)` in bits between axis groups of one table,
/// computed as `H(L,G) + H(R,G) - H(L,R,G) - H(G)`.
pub fn mutual_information_of(
    m: &MarginalTable,
    left: &[usize],
    right: &[usize],
    given: &[usize],
) -> Result<f64> {
    let joined = |a: &[usize], b: &[usize]| [a, b].concat();
    let h = |axes: Vec<usize>| -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        Ok(entropy_bits(m.project_axes(&axes)?.counts()))
    };
    let h_lg = h(joined(left, given))?;
    let h_rg = h(joined(right, given))?;
    let h_lrg = h([left, right, given].concat())?;
    let h_g = h(given.to_vec())?;
    Ok((h_lg + h_rg - h_lrg - h_g).max(0.0))
}

/// Empirical (conditional) mutual information `I(X_i; X_j | X_given)` in bits.
pub fn mutual_information(table: &Table, i: usize, j: usize, given: &[usize]) -> Result<f64> {
    if i == j || given.contains(&i) || given.contains(&j) {
        return input("mutual information needs distinct attributes");
    }
    let attrs = [&[i, j][..], given].concat();
    let m = marginal(table, &attrs)?;
    let given_axes: Vec<usize> = (2..attrs.len()).collect();
    mutual_information_of(&m, &[0], &[1], &given_axes)
}
