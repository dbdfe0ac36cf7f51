use nalgebra::{DMatrix, SymmetricEigen};

use crate::domain::{ColumnData, Table};
use crate::error::{input, Result};

pub const LOGISTIC_ITERATIONS: usize = 500;
pub const LOGISTIC_L2: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationScores {
    pub accuracy: f64,
    /// Minority-class F1 for two classes, macro F1 otherwise.
    pub f1: f64,
}

/// Feature map learned on the training table: one-hot categoricals,
/// standardized continuous columns and a trailing intercept.
struct Features {
    target: usize,
    scaling: Vec<Option<(f64, f64)>>,
    width: usize,
}

impl Features {
    fn fit(train: &Table, target: usize) -> Self {
        let mut width = 0;
        let scaling = (0..train.n_cols())
            .map(|j| {
                if j == target {
                    return None;
                }
                match train.column(j) {
                    ColumnData::Values(v) => {
                        width += 1;
                        let n = v.len() as f64;
                        let m = v.iter().sum::<f64>() / n;
                        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
                        Some((m, if sd > 1e-12 { sd } else { 1.0 }))
                    }
                    ColumnData::Codes(_) => {
                        width += train.schema().column(j).cardinality().unwrap_or(0);
                        None
                    }
                }
            })
            .collect();
        Self {
            target,
            scaling,
            width: width + 1,
        }
    }

    fn matrix(&self, t: &Table) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(t.n_rows(), self.width);
        let mut offset = 0;
        for j in 0..t.n_cols() {
            if j == self.target {
                continue;
            }
            match (t.column(j), self.scaling[j]) {
                (ColumnData::Values(v), Some((m, sd))) => {
                    for (r, &val) in v.iter().enumerate() {
                        x[(r, offset)] = (val - m) / sd;
                    }
                    offset += 1;
                }
                (ColumnData::Codes(c), _) => {
                    for (r, &code) in c.iter().enumerate() {
                        x[(r, offset + code as usize)] = 1.0;
                    }
                    offset += t.schema().column(j).cardinality().unwrap_or(0);
                }
                _ => unreachable!("schemas are checked to match"),
            }
        }
        x.column_mut(self.width - 1).fill(1.0);
        x
    }
}

fn softmax_rows(z: &mut DMatrix<f64>) {
    for mut row in z.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row.apply(|v| *v /= s);
    }
}

fn argmax_rows(z: &DMatrix<f64>) -> Vec<usize> {
    z.row_iter()
        .map(|row| (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b }))
        .collect()
}

fn f1_of(class: usize, truth: &[usize], pred: &[usize]) -> f64 {
    let tp = truth
        .iter()
        .zip(pred)
        .filter(|(&t, &p)| t == class && p == class)
        .count() as f64;
    let fp = truth
        .iter()
        .zip(pred)
        .filter(|(&t, &p)| t != class && p == class)
        .count() as f64;
    let fn_ = truth
        .iter()
        .zip(pred)
        .filter(|(&t, &p)| t == class && p != class)
        .count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// Accuracy and F1. With two classes F1 is that of the class rarer in `truth`
/// (ties pick class 1); otherwise it is the macro average over every class
/// present in `truth` or `pred`.
pub fn classification_scores(
    truth: &[usize],
    pred: &[usize],
    classes: usize,
) -> Result<ClassificationScores> {
    if truth.is_empty() || truth.len() != pred.len() {
        return input("scores need equally many non-zero truths and predictions");
    }
    let accuracy =
        truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64 / truth.len() as f64;
    let f1 = if classes == 2 {
        let ones = truth.iter().filter(|&&t| t == 1).count();
        let positive = if ones * 2 <= truth.len() { 1 } else { 0 };
        f1_of(positive, truth, pred)
    } else {
        let present: Vec<usize> = (0..classes)
            .filter(|c| truth.contains(c) || pred.contains(c))
            .collect();
        present.iter().map(|&c| f1_of(c, truth, pred)).sum::<f64>() / present.len() as f64
    };
    Ok(ClassificationScores { accuracy, f1 })
}

/// Multinomial logistic regression on `train`, scored on `test`.
///
/// Zero-initialized weights, full-batch gradient descent for a fixed number
/// of iterations with step `1 / L` from the loss's smoothness bound, and an
/// L2 penalty on all but the intercept. Fully deterministic.
pub fn logistic_fit_eval(
    train: &Table,
    test: &Table,
    target: usize,
) -> Result<ClassificationScores> {
    if train.schema() != test.schema() {
        return input("train and test must share a schema");
    }
    if target >= train.n_cols() {
        return input(format!("target column {target} out of range"));
    }
    let classes = match train.schema().column(target).cardinality() {
        Some(k) if k >= 2 => k,
        _ => return input("the target must be categorical with at least two classes"),
    };
    if train.n_rows() == 0 || test.n_rows() == 0 {
        return input("classification needs non-empty train and test tables");
    }
    let features = Features::fit(train, target);
    let x = features.matrix(train);
    let n = x.nrows() as f64;
    let y_codes = train.codes(target)?;
    let mut y = DMatrix::zeros(x.nrows(), classes);
    for (r, &c) in y_codes.iter().enumerate() {
        y[(r, c as usize)] = 1.0;
    }

    let gram = x.transpose() * &x / n;
    let top = SymmetricEigen::new(gram).eigenvalues.max();
    let step = 1.0 / (0.5 * top + LOGISTIC_L2);
    let mut w = DMatrix::<f64>::zeros(features.width, classes);
    let mut penalty = DMatrix::<f64>::from_element(features.width, classes, LOGISTIC_L2);
    penalty.row_mut(features.width - 1).fill(0.0);
    for _ in 0..LOGISTIC_ITERATIONS {
        let mut p = &x * &w;
        softmax_rows(&mut p);
        let grad = x.transpose() * (p - &y) / n + penalty.component_mul(&w);
        w -= grad * step;
    }

    let pred = argmax_rows(&(features.matrix(test) * &w));
    let truth: Vec<usize> = test.codes(target)?.iter().map(|&c| c as usize).collect();
    classification_scores(&truth, &pred, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, split, GaussFamily, GaussSpec};
    use crate::domain::{ColumnDomain, Schema};

    fn labeled(xs: &[f64], ys: &[u32]) -> Table {
        let schema = Schema::new(
            vec![
                ColumnDomain::continuous("x", -10.0, 10.0, 10).unwrap(),
                ColumnDomain::categorical("y", 2).unwrap(),
            ],
            Some(1),
        )
        .unwrap();
        Table::new(
            schema,
            vec![
                ColumnData::Values(xs.to_vec()),
                ColumnData::Codes(ys.to_vec()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn separable_two_class() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0 - 5.0).collect();
        let ys: Vec<u32> = xs.iter().map(|&x| u32::from(x > 0.1)).collect();
        let t = labeled(&xs, &ys);
        let s = logistic_fit_eval(&t, &t, 1).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn majority_predictor_has_zero_minority_f1() {
        let truth = [0, 0, 0, 1, 0, 1, 0, 0];
        let s = classification_scores(&truth, &[0; 8], 2).unwrap();
        assert_eq!(s.accuracy, 0.75);
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn macro_f1_oracle() {
        let truth = [0, 0, 1, 1, 2, 2];
        let pred = [0, 1, 1, 1, 2, 0];
        let s = classification_scores(&truth, &pred, 3).unwrap();
        // per class: 2/(2+1+1)... tp=1,fp=1,fn=1 -> 0.5; tp=2,fp=1,fn=0 -> 0.8; tp=1,fp=0,fn=1 -> 2/3
        assert!((s.f1 - (0.5 + 0.8 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((s.accuracy - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn ring_mixture_beats_chance() {
        let t = generate(&GaussSpec::new(GaussFamily::MixSup, 16_000, 8, 1).unwrap()).unwrap();
        let (train, test) = split(&t, 0.2, 2).unwrap();
        let a = logistic_fit_eval(&train, &test, 8).unwrap();
        let b = logistic_fit_eval(&train, &test, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.accuracy >= 3.0 / 6.0, "{a:?}");
    }
}
