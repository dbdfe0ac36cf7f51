use crate::domain::{ColumnData, Table};
use crate::error::{input, Result};

fn continuous_columns(table: &Table) -> Vec<&[f64]> {
    table
        .columns()
        .iter()
        .filter_map(|c| match c {
            ColumnData::Values(v) => Some(v.as_slice()),
            ColumnData::Codes(_) => None,
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation; 0 when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

/// Average of the per-column means of the continuous columns.
pub fn stat_mean(table: &Table) -> Result<f64> {
    let cols = continuous_columns(table);
    if cols.is_empty() || table.n_rows() == 0 {
        return input("the mean statistic needs at least one continuous column and one row");
    }
    Ok(cols.iter().map(|c| mean(c)).sum::<f64>() / cols.len() as f64)
}

/// Mean Pearson correlation over neighbouring continuous columns `(i, i + 1)`,
/// and over all remaining distinct pairs.
pub fn stat_correlations(table: &Table) -> Result<(f64, f64)> {
    let cols = continuous_columns(table);
    let d = cols.len();
    if d < 3 {
        return input(format!(
            "correlation statistics need at least 3 continuous columns, got {d}"
        ));
    }
    let (mut near, mut far) = (0.0, 0.0);
    for i in 0..d {
        for j in i + 1..d {
            let r = pearson(cols[i], cols[j]);
            if j == i + 1 {
                near += r;
            } else {
                far += r;
            }
        }
    }
    let far_pairs = (d * (d - 1) / 2 - (d - 1)) as f64;
    Ok((near / (d - 1) as f64, far / far_pairs))
}
