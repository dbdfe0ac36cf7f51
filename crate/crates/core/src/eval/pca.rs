use nalgebra::{DMatrix, SymmetricEigen};

use crate::domain::{ColumnData, Table};
use crate::error::{input, Result};

/// Top-two principal axes of a table's continuous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-length axes; in each, the entry of largest magnitude is positive.
    pub components: [Vec<f64>; 2],
    /// Variances along the two axes, largest first.
    pub variances: [f64; 2],
    columns: Vec<usize>,
}

fn continuous_indices(table: &Table) -> Vec<usize> {
    (0..table.n_cols())
        .filter(|&j| matches!(table.column(j), ColumnData::Values(_)))
        .collect()
}

impl Pca {
    /// Eigendecomposition of the sample covariance of the continuous columns.
    pub fn fit(table: &Table) -> Result<Self> {
        let columns = continuous_indices(table);
        let d = columns.len();
        let n = table.n_rows();
        if d < 2 || n < 2 {
            return input(format!(
                "PCA needs at least two continuous columns and two rows, got {d} and {n}"
            ));
        }
        let data: Vec<&[f64]> = columns
            .iter()
            .map(|&j| table.values(j))
            .collect::<Result<_>>()?;
        let mean: Vec<f64> = data
            .iter()
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let s: f64 = data[a]
                    .iter()
                    .zip(data[b])
                    .map(|(x, y)| (x - mean[a]) * (y - mean[b]))
                    .sum::<f64>()
                    / (n - 1) as f64;
                cov[(a, b)] = s;
                cov[(b, a)] = s;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let axis = |k: usize| -> Vec<f64> {
            let v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v
            }
        };
        Ok(Self {
            mean,
            components: [axis(0), axis(1)],
            variances: [
                eig.eigenvalues[order[0]].max(0.0),
                eig.eigenvalues[order[1]].max(0.0),
            ],
            columns,
        })
    }

    /// Coordinates of every row of `table` (same schema as the fitted one) on the two axes.
    pub fn project(&self, table: &Table) -> Result<Vec<[f64; 2]>> {
        if continuous_indices(table) != self.columns {
            return input("table columns differ from the ones PCA was fitted on");
        }
        let data: Vec<&[f64]> = self
            .columns
            .iter()
            .map(|&j| table.values(j))
            .collect::<Result<_>>()?;
        Ok((0..table.n_rows())
            .map(|r| {
                let mut p = [0.0; 2];
                for (k, comp) in self.components.iter().enumerate() {
                    p[k] = data
                        .iter()
                        .zip(comp)
                        .zip(&self.mean)
                        .map(|((c, w), m)| (c[r] - m) * w)
                        .sum();
                }
                p
            })
            .collect())
    }
}

/// Fits [`Pca`] on `table` and projects the table onto it.
pub fn pca_top2(table: &Table) -> Result<(Pca, Vec<[f64; 2]>)> {
    let pca = Pca::fit(table)?;
    let points = pca.project(table)?;
    Ok((pca, points))
}
