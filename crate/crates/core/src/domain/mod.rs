//! Schemas, tables, discretization and marginal (contingency) tables.

mod discretize;
mod info;
mod marginal;

pub use discretize::{discretize, undiscretize, Discretized, DEFAULT_BINS};
pub use info::{entropy_bits, mutual_information, mutual_information_of};
pub use marginal::{marginal, to_distribution, tvd_similarity, MarginalTable};

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical { categories: Vec<String> },
    Continuous { lower: f64, upper: f64, bins: usize },
}

/// Public description of one column. Bounds and category lists are schema
/// metadata, never derived from the private rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDomain {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnDomain {
    /// Categorical column whose categories are labelled `"0"`, `"1"`, ...
    pub fn categorical(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        Self::categorical_labeled(name, (0..cardinality).map(|k| k.to_string()).collect())
    }

    pub fn categorical_labeled(name: impl Into<String>, categories: Vec<String>) -> Result<Self> {
        let name = name.into();
        if categories.len() < 2 {
            return input(format!(
                "categorical column `{name}` needs at least 2 categories"
            ));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = categories.iter().find(|c| !seen.insert(c.as_str())) {
            return input(format!(
                "categorical column `{name}` repeats category `{dup}`"
            ));
        }
        Ok(Self {
            name,
            kind: ColumnKind::Categorical { categories },
        })
    }

    pub fn continuous(
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        bins: usize,
    ) -> Result<Self> {
        let name = name.into();
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return input(format!(
                "continuous column `{name}` needs finite bounds lower < upper"
            ));
        }
        if bins < 2 {
            return input(format!("continuous column `{name}` needs at least 2 bins"));
        }
        Ok(Self {
            name,
            kind: ColumnKind::Continuous { lower, upper, bins },
        })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }

    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            ColumnKind::Categorical { categories } => Some(categories.len()),
            ColumnKind::Continuous { .. } => None,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            ColumnKind::Continuous { lower, upper, .. } => Some((lower, upper)),
            ColumnKind::Categorical { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnDomain>,
    target: Option<usize>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnDomain>, target: Option<usize>) -> Result<Self> {
        if columns.is_empty() {
            return input("schema needs at least one column");
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.name.as_str())) {
            return input(format!("duplicate column name `{}`", dup.name));
        }
        if let Some(t) = target {
            if t >= columns.len() {
                return input(format!(
                    "target index {t} out of range for {} columns",
                    columns.len()
                ));
            }
        }
        Ok(Self { columns, target })
    }

    pub fn columns(&self) -> &[ColumnDomain] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &ColumnDomain {
        &self.columns[j]
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_all_categorical(&self) -> bool {
        self.columns.iter().all(ColumnDomain::is_categorical)
    }

    /// Cardinalities of an all-categorical schema.
    pub fn cardinalities(&self) -> Result<Vec<usize>> {
        self.columns
            .iter()
            .map(|c| {
                c.cardinality().ok_or_else(|| {
                    Error::Input(format!(
                        "column `{}` is continuous; discretize first",
                        c.name
                    ))
                })
            })
            .collect()
    }
}

/// Column storage: category codes or real values.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Codes(Vec<u32>),
    Values(Vec<f64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Codes(c) => c.len(),
            ColumnData::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            ColumnData::Codes(c) => c[i] as f64,
            ColumnData::Values(v) => v[i],
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Codes(c) => ColumnData::Codes(rows.iter().map(|&i| c[i]).collect()),
            ColumnData::Values(v) => ColumnData::Values(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// An immutable `n x d` dataset conforming to a [`Schema`], stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: Schema,
    columns: Vec<ColumnData>,
    n_rows: usize,
}

impl Table {
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return input(format!(
                "schema has {} columns but {} were supplied",
                schema.len(),
                columns.len()
            ));
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return input("a table needs at least one row");
        }
        for (domain, data) in schema.columns().iter().zip(&columns) {
            if data.len() != n_rows {
                return input(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    domain.name,
                    data.len()
                ));
            }
            match (&domain.kind, data) {
                (ColumnKind::Categorical { categories }, ColumnData::Codes(codes)) => {
                    if let Some(bad) = codes.iter().find(|&&c| c as usize >= categories.len()) {
                        return input(format!(
                            "column `{}` holds code {bad} outside cardinality {}",
                            domain.name,
                            categories.len()
                        ));
                    }
                }
                (ColumnKind::Continuous { .. }, ColumnData::Values(values)) => {
                    if values.iter().any(|v| !v.is_finite()) {
                        return input(format!("column `{}` holds a non-finite value", domain.name));
                    }
                }
                _ => {
                    return input(format!(
                        "column `{}` storage does not match its declared kind",
                        domain.name
                    ))
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            n_rows,
        })
    }

    /// Builds a table from row records; categorical cells must hold integral codes.
    pub fn from_rows(schema: Schema, rows: &[Vec<f64>]) -> Result<Self> {
        let d = schema.len();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return input(format!("row {i} does not have {d} values"));
        }
        let columns = schema
            .columns()
            .iter()
            .enumerate()
            .map(|(j, domain)| {
                if domain.is_categorical() {
                    rows.iter()
                        .map(|r| {
                            let v = r[j];
                            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                                Ok(v as u32)
                            } else {
                                input(format!(
                                    "column `{}` expects a category code, got {v}",
                                    domain.name
                                ))
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                        .map(ColumnData::Codes)
                } else {
                    Ok(ColumnData::Values(rows.iter().map(|r| r[j]).collect()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &ColumnData {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn codes(&self, j: usize) -> Result<&[u32]> {
        match &self.columns[j] {
            ColumnData::Codes(c) => Ok(c),
            ColumnData::Values(_) => input(format!(
                "column `{}` is continuous; discretize first",
                self.schema.column(j).name
            )),
        }
    }

    pub fn values(&self, j: usize) -> Result<&[f64]> {
        match &self.columns[j] {
            ColumnData::Values(v) => Ok(v),
            ColumnData::Codes(_) => input(format!(
                "column `{}` is categorical",
                self.schema.column(j).name
            )),
        }
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col].get(row)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.get(i)).collect()
    }

    /// A new table holding the given rows (repeats allowed) in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Table> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_rows) {
            return input(format!(
                "row index {bad} out of range for {} rows",
                self.n_rows
            ));
        }
        Table::new(
            self.schema.clone(),
            self.columns.iter().map(|c| c.select(rows)).collect(),
        )
    }

    /// A new table restricted to the given columns; the target is kept if selected.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Table> {
        let domains = cols
            .iter()
            .map(|&j| self.schema.column(j).clone())
            .collect();
        let target = self
            .schema
            .target()
            .and_then(|t| cols.iter().position(|&j| j == t));
        Table::new(
            Schema::new(domains, target)?,
            cols.iter().map(|&j| self.columns[j].clone()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed_schema() -> Schema {
        Schema::new(
            vec![
                ColumnDomain::continuous("x", 0.0, 1.0, 20).unwrap(),
                ColumnDomain::categorical("c", 3).unwrap(),
            ],
            Some(1),
        )
        .unwrap()
    }

    #[test]
    fn domain_invariants() {
        assert!(ColumnDomain::categorical("c", 1).is_err());
        assert!(ColumnDomain::continuous("x", 1.0, 1.0, 5).is_err());
        assert!(ColumnDomain::continuous("x", 0.0, 1.0, 1).is_err());
        assert!(ColumnDomain::categorical_labeled("c", vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn schema_invariants() {
        let a = ColumnDomain::categorical("a", 2).unwrap();
        assert!(Schema::new(vec![a.clone(), a.clone()], None).is_err());
        assert!(Schema::new(vec![a.clone()], Some(1)).is_err());
        assert!(Schema::new(vec![], None).is_err());
        assert!(mixed_schema().cardinalities().is_err());
    }

    #[test]
    fn table_validation() {
        let schema = mixed_schema();
        let ok = Table::from_rows(schema.clone(), &[vec![0.5, 2.0], vec![0.1, 0.0]]).unwrap();
        assert_eq!((ok.n_rows(), ok.n_cols()), (2, 2));
        assert_eq!(ok.row(0), vec![0.5, 2.0]);
        assert!(Table::from_rows(schema.clone(), &[vec![0.5, 3.0]]).is_err());
        assert!(Table::from_rows(schema.clone(), &[vec![0.5, 1.5]]).is_err());
        assert!(Table::from_rows(schema.clone(), &[vec![f64::NAN, 1.0]]).is_err());
        assert!(Table::from_rows(schema, &[]).is_err());
    }

    #[test]
    fn row_and_column_selection() {
        let t = Table::from_rows(
            mixed_schema(),
            &[vec![0.1, 0.0], vec![0.2, 1.0], vec![0.3, 2.0]],
        )
        .unwrap();
        let s = t.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.row(0), vec![0.3, 2.0]);
        assert_eq!(s.row(1), vec![0.1, 0.0]);
        assert!(t.select_rows(&[3]).is_err());
        let c = t.select_columns(&[1]).unwrap();
        assert_eq!(c.schema().target(), Some(0));
        assert_eq!(c.codes(0).unwrap(), &[0, 1, 2]);
    }
}
