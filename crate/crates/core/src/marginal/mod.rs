//! Marginal-based synthesizers: Independent, PrivBayes and MST.
//!
//! All three follow select-measure-generate on discretized (all-categorical)
//! tables: pick a set of low-dimensional marginals, measure them with noise,
//! and sample from a distribution consistent with the noisy measurements.

mod independent;
mod mst;
mod privbayes;

pub use independent::{independent_fit, IndependentModel};
pub use mst::{mst_fit, mst_select, MstModel, IPF_MAX_ROUNDS, IPF_TOLERANCE, MST_DEFAULT_DELTA};
pub use privbayes::{
    default_degree, mi_sensitivity, privbayes_fit, BayesNetwork, PrivBayesModel,
    MAX_NEW_PARENT_SETS,
};

use crate::domain::{ColumnData, Schema, Table};
use crate::error::{input, Result};

pub(crate) fn require_discrete(table: &Table) -> Result<Vec<usize>> {
    table.schema().cardinalities()
}

pub(crate) fn check_sample_size(n: usize) -> Result<()> {
    if n == 0 {
        return input("sample size must be at least 1");
    }
    Ok(())
}

/// Index drawn from a normalized probability vector given a uniform `u` in `[0, 1)`.
pub(crate) fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Normalizes in place; an all-zero slice becomes uniform.
pub(crate) fn normalize_or_uniform(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

pub(crate) fn table_from_codes(schema: &Schema, columns: Vec<Vec<u32>>) -> Result<Table> {
    Table::new(
        schema.clone(),
        columns.into_iter().map(ColumnData::Codes).collect(),
    )
}
