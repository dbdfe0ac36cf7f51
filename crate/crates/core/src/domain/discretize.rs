use super::{ColumnData, ColumnDomain, ColumnKind, Schema, Table};
use crate::error::{input, Result};

/// Bin count used wherever a continuous column is histogrammed.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone)]
pub struct Discretized {
    pub table: Table,
    /// Continuous values that fell outside their declared bounds and were clamped.
    pub clamped: usize,
}

/// Maps each continuous value to `floor((v - lo) / (hi - lo) * bins)`, clamped to `[0, bins - 1]`.
///
/// Categorical columns pass through unchanged, so the map is idempotent.
pub fn discretize(table: &Table, bins: usize) -> Result<Discretized> {
    if bins < 2 {
        return input(format!("discretization needs at least 2 bins, got {bins}"));
    }
    let mut clamped = 0;
    let mut domains = Vec::with_capacity(table.n_cols());
    let mut columns = Vec::with_capacity(table.n_cols());
    for (domain, data) in table.schema().columns().iter().zip(table.columns()) {
        match (&domain.kind, data) {
            (ColumnKind::Continuous { lower, upper, .. }, ColumnData::Values(values)) => {
                let width = upper - lower;
                let codes = values
                    .iter()
                    .map(|&v| {
                        if v < *lower || v > *upper {
                            clamped += 1;
                        }
                        let pos = ((v - lower) / width * bins as f64).floor();
                        pos.clamp(0.0, (bins - 1) as f64) as u32
                    })
                    .collect();
                domains.push(ColumnDomain::categorical_labeled(
                    domain.name.clone(),
                    (0..bins).map(|k| format!("bin{k}")).collect(),
                )?);
                columns.push(ColumnData::Codes(codes));
            }
            _ => {
                domains.push(domain.clone());
                columns.push(data.clone());
            }
        }
    }
    let schema = Schema::new(domains, table.schema().target())?;
    Ok(Discretized {
        table: Table::new(schema, columns)?,
        clamped,
    })
}

/// Maps bin codes back to bin midpoints for every column that is continuous in `original`.
pub fn undiscretize(discrete: &Table, original: &Schema) -> Result<Table> {
    if discrete.n_cols() != original.len() {
        return input("discrete table and original schema disagree on column count");
    }
    let columns = original
        .columns()
        .iter()
        .enumerate()
        .map(|(j, domain)| match domain.kind {
            ColumnKind::Continuous { lower, upper, .. } => {
                let codes = discrete.codes(j)?;
                let bins = discrete.schema().column(j).cardinality().unwrap_or(1);
                let width = (upper - lower) / bins as f64;
                Ok(ColumnData::Values(
                    codes
                        .iter()
                        .map(|&c| lower + (c as f64 + 0.5) * width)
                        .collect(),
                ))
            }
            ColumnKind::Categorical { .. } => Ok(ColumnData::Codes(discrete.codes(j)?.to_vec())),
        })
        .collect::<Result<Vec<_>>>()?;
    Table::new(original.clone(), columns)
}
