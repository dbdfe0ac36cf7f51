use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{ColumnData, ColumnKind, Schema, Table};
use crate::error::{input, Error, Result};

/// Loads a header-first, comma-separated UTF-8 file whose header matches the schema's names.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Table> {
    read_csv(File::open(path)?, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    if header.iter().collect::<Vec<_>>() != names {
        return input(format!(
            "CSV header {:?} does not match schema columns {names:?}",
            header.iter().collect::<Vec<_>>()
        ));
    }

    let mut columns: Vec<ColumnData> = schema
        .columns()
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical { .. } => ColumnData::Codes(Vec::new()),
            ColumnKind::Continuous { .. } => ColumnData::Values(Vec::new()),
        })
        .collect();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        for ((domain, data), field) in schema
            .columns()
            .iter()
            .zip(columns.iter_mut())
            .zip(record.iter())
        {
            let err = |message: String| Error::Parse {
                row,
                column: domain.name.clone(),
                message,
            };
            match (&domain.kind, data) {
                (ColumnKind::Categorical { categories }, ColumnData::Codes(codes)) => {
                    let code = categories
                        .iter()
                        .position(|c| c == field)
                        .ok_or_else(|| err(format!("unknown category `{field}`")))?;
                    codes.push(code as u32);
                }
                (ColumnKind::Continuous { .. }, ColumnData::Values(values)) => {
                    let v: f64 = field
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("cannot parse `{field}` as a number")))?;
                    if !v.is_finite() {
                        return Err(err(format!("non-finite value `{field}`")));
                    }
                    values.push(v);
                }
                _ => unreachable!("column storage mirrors the schema"),
            }
        }
    }
    Table::new(schema.clone(), columns)
}

pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(table.schema().columns().iter().map(|c| c.name.as_str()))?;
    let mut record = Vec::with_capacity(table.n_cols());
    for i in 0..table.n_rows() {
        record.clear();
        for (domain, data) in table.schema().columns().iter().zip(table.columns()) {
            record.push(match (&domain.kind, data) {
                (ColumnKind::Categorical { categories }, ColumnData::Codes(c)) => {
                    categories[c[i] as usize].clone()
                }
                // Display for f64 prints the shortest string that parses back exactly.
                (_, data) => data.get(i).to_string(),
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    write_csv(table, File::create(path)?)
}
