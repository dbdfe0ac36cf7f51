use super::Table;
use crate::error::{input, Result};

/// Dense count (or probability) tensor over an ordered attribute tuple.
///
/// Cells are laid out row-major: the last attribute varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    attrs: Vec<usize>,
    shape: Vec<usize>,
    counts: Vec<f64>,
}

impl MarginalTable {
    pub fn new(attrs: Vec<usize>, shape: Vec<usize>, counts: Vec<f64>) -> Result<Self> {
        if attrs.len() != shape.len() {
            return input("marginal attrs and shape differ in length");
        }
        let cells: usize = shape.iter().product();
        if counts.len() != cells {
            return input(format!(
                "marginal of shape {shape:?} needs {cells} cells, got {}",
                counts.len()
            ));
        }
        if counts.iter().any(|c| !c.is_finite()) {
            return input("marginal counts must be finite");
        }
        Ok(Self {
            attrs,
            shape,
            counts,
        })
    }

    pub fn attrs(&self) -> &[usize] {
        &self.attrs
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<f64> {
        self.counts
    }

    /// Same attributes and shape, new cell values.
    pub fn with_counts(&self, counts: Vec<f64>) -> Result<Self> {
        Self::new(self.attrs.clone(), self.shape.clone(), counts)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    /// Negative cells set to zero.
    pub fn clamp_nonnegative(&self) -> Self {
        Self {
            attrs: self.attrs.clone(),
            shape: self.shape.clone(),
            counts: self.counts.iter().map(|c| c.max(0.0)).collect(),
        }
    }

    /// Sums out every axis not listed in `axes` (positions into `attrs`), keeping the given order.
    pub fn project_axes(&self, axes: &[usize]) -> Result<Self> {
        if let Some(&bad) = axes.iter().find(|&&a| a >= self.shape.len()) {
            return input(format!(
                "axis {bad} out of range for {}-way marginal",
                self.shape.len()
            ));
        }
        let shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let out_strides = strides(&shape);
        let mut out = vec![0.0; shape.iter().product()];
        let mut index = vec![0usize; self.shape.len()];
        for &c in &self.counts {
            let flat: usize = axes
                .iter()
                .zip(&out_strides)
                .map(|(&a, s)| index[a] * s)
                .sum();
            out[flat] += c;
            // odometer increment, last axis fastest
            for k in (0..index.len()).rev() {
                index[k] += 1;
                if index[k] < self.shape[k] {
                    break;
                }
                index[k] = 0;
            }
        }
        Self::new(axes.iter().map(|&a| self.attrs[a]).collect(), shape, out)
    }

    /// Projection onto a subset of this table's attributes, given by attribute index.
    pub fn project(&self, attrs: &[usize]) -> Result<Self> {
        let axes = attrs
            .iter()
            .map(|a| {
                self.attrs
                    .iter()
                    .position(|x| x == a)
                    .ok_or_else(|| crate::Error::Input(format!("attribute {a} not in marginal")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.project_axes(&axes)
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Exact contingency counts of `table` over `attrs`.
pub fn marginal(table: &Table, attrs: &[usize]) -> Result<MarginalTable> {
    for (k, a) in attrs.iter().enumerate() {
        if *a >= table.n_cols() {
            return input(format!("attribute {a} out of range"));
        }
        if attrs[..k].contains(a) {
            return input(format!("attribute {a} repeated in marginal"));
        }
    }
    let shape = attrs
        .iter()
        .map(|&a| {
            table.schema().column(a).cardinality().ok_or_else(|| {
                crate::Error::Input(format!(
                    "column `{}` is continuous; discretize first",
                    table.schema().column(a).name
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let st = strides(&shape);
    let mut flat = vec![0usize; table.n_rows()];
    for (&a, &s) in attrs.iter().zip(&st) {
        for (f, &c) in flat.iter_mut().zip(table.codes(a)?) {
            *f += c as usize * s;
        }
    }
    let mut counts = vec![0.0; shape.iter().product()];
    for f in flat {
        counts[f] += 1.0;
    }
    MarginalTable::new(attrs.to_vec(), shape, counts)
}

/// Clamps negative cells to zero and normalizes to total mass one.
///
/// A table with no positive mass becomes the uniform distribution.
pub fn to_distribution(m: &MarginalTable) -> MarginalTable {
    let clamped = m.clamp_nonnegative();
    let total = clamped.total();
    let counts = if total > 0.0 {
        clamped.counts.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / m.len() as f64; m.len()]
    };
    MarginalTable {
        attrs: m.attrs.clone(),
        shape: m.shape.clone(),
        counts,
    }
}

/// `1 - TVD(p, q)` for two normalized tables of the same shape.
pub fn tvd_similarity(p: &MarginalTable, q: &MarginalTable) -> Result<f64> {
    if p.shape != q.shape {
        return input(format!("shape mismatch: {:?} vs {:?}", p.shape, q.shape));
    }
    let l1: f64 = p
        .counts
        .iter()
        .zip(&q.counts)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((1.0 - 0.5 * l1).clamp(0.0, 1.0))
}
