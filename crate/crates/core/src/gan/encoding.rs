use ndarray::{Array2, ArrayView1, Axis};

use crate::domain::{ColumnData, ColumnKind, Schema, Table};
use crate::error::{input, Result};

#[derive(Debug, Clone, PartialEq)]
enum Block {
    Continuous {
        lower: f64,
        upper: f64,
        offset: usize,
    },
    Categorical {
        k: usize,
        offset: usize,
    },
}

/// Row encoding for the networks: continuous columns min-max scaled into
/// `[-1, 1]` with the schema bounds, categorical columns one-hot.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    schema: Schema,
    blocks: Vec<Block>,
    width: usize,
}

impl Encoder {
    pub fn new(schema: &Schema) -> Self {
        let mut offset = 0;
        let blocks = schema
            .columns()
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Continuous { lower, upper, .. } => {
                    let b = Block::Continuous {
                        lower: *lower,
                        upper: *upper,
                        offset,
                    };
                    offset += 1;
                    b
                }
                ColumnKind::Categorical { categories } => {
                    let b = Block::Categorical {
                        k: categories.len(),
                        offset,
                    };
                    offset += categories.len();
                    b
                }
            })
            .collect();
        Self {
            schema: schema.clone(),
            blocks,
            width: offset,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn encode(&self, table: &Table) -> Result<Array2<f64>> {
        if table.schema() != &self.schema {
            return input("table schema differs from the encoder's");
        }
        let mut out = Array2::zeros((table.n_rows(), self.width));
        for (j, block) in self.blocks.iter().enumerate() {
            match (block, table.column(j)) {
                (
                    Block::Continuous {
                        lower,
                        upper,
                        offset,
                    },
                    ColumnData::Values(v),
                ) => {
                    for (r, &x) in v.iter().enumerate() {
                        out[[r, *offset]] = scale(x, *lower, *upper);
                    }
                }
                (Block::Categorical { offset, .. }, ColumnData::Codes(c)) => {
                    for (r, &code) in c.iter().enumerate() {
                        out[[r, offset + code as usize]] = 1.0;
                    }
                }
                _ => return input(format!("column {j} storage does not match its kind")),
            }
        }
        Ok(out)
    }

    /// Inverse map: continuous cells unscaled (after clamping to `[-1, 1]`),
    /// categorical blocks decoded by argmax.
    pub fn decode(&self, encoded: &Array2<f64>) -> Result<Table> {
        if encoded.ncols() != self.width {
            return input(format!(
                "encoded width {} differs from {}",
                encoded.ncols(),
                self.width
            ));
        }
        let columns = self
            .blocks
            .iter()
            .map(|block| match block {
                Block::Continuous {
                    lower,
                    upper,
                    offset,
                } => ColumnData::Values(
                    encoded
                        .column(*offset)
                        .iter()
                        .map(|&y| lower + (y.clamp(-1.0, 1.0) + 1.0) / 2.0 * (upper - lower))
                        .collect(),
                ),
                Block::Categorical { k, offset } => ColumnData::Codes(
                    encoded
                        .axis_iter(Axis(0))
                        .map(|row| argmax(row.slice(ndarray::s![*offset..offset + k])) as u32)
                        .collect(),
                ),
            })
            .collect();
        Table::new(self.schema.clone(), columns)
    }

    /// Generator output layer: `tanh` on continuous cells, softmax per one-hot block.
    pub fn activate(&self, logits: &Array2<f64>) -> Array2<f64> {
        let mut out = logits.clone();
        for block in &self.blocks {
            match block {
                Block::Continuous { offset, .. } => out.column_mut(*offset).mapv_inplace(f64::tanh),
                Block::Categorical { k, offset } => {
                    for mut row in out.axis_iter_mut(Axis(0)) {
                        let mut cells = row.slice_mut(ndarray::s![*offset..offset + k]);
                        let max = cells.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                        cells.mapv_inplace(|x| (x - max).exp());
                        let total = cells.sum();
                        cells.mapv_inplace(|x| x / total);
                    }
                }
            }
        }
        out
    }

    /// Gradient w.r.t. the logits given the activated output and its upstream gradient.
    pub fn activate_backward(&self, activated: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
        let mut out = grad.clone();
        for block in &self.blocks {
            match block {
                Block::Continuous { offset, .. } => {
                    let y = activated.column(*offset);
                    out.column_mut(*offset)
                        .zip_mut_with(&y, |g, &y| *g *= 1.0 - y * y);
                }
                Block::Categorical { k, offset } => {
                    let range = ndarray::s![.., *offset..offset + k];
                    let y = activated.slice(range);
                    let mut g = out.slice_mut(range);
                    for (mut g_row, y_row) in g.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))) {
                        let dot = g_row.dot(&y_row);
                        g_row.zip_mut_with(&y_row, |g, &y| *g = y * (*g - dot));
                    }
                }
            }
        }
        out
    }
}

fn scale(x: f64, lower: f64, upper: f64) -> f64 {
    if upper > lower {
        (2.0 * (x - lower) / (upper - lower) - 1.0).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
