//! CSV and JSON persistence.

use nalgebra::DMatrix;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gest::GSamples;

/// A column of a CSV table.
pub enum Column<'a> {
    Real(&'a [f64]),
    Flag(&'a [bool]),
}

impl Column<'_> {
    fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Flag(v) => v.len(),
        }
    }

    fn cell(&self, k: usize) -> String {
        match self {
            Column::Real(v) => v[k].to_string(),
            Column::Flag(v) => u8::from(v[k]).to_string(),
        }
    }
}

/// Writes named columns of equal length.
pub fn write_columns(path: &Path, columns: &[(&str, Column<'_>)]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    if let Some((name, c)) = columns.iter().find(|c| c.1.len() != rows) {
        return Err(Error::Config(format!(
            "column `{name}` has {} rows, expected {rows}",
            c.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(columns.iter().map(|c| c.0))?;
    for k in 0..rows {
        w.write_record(columns.iter().map(|c| c.1.cell(k)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes serializable rows with a header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse(path: &Path, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Config(format!("{}: `{s}` is not a number", path.display())))
}

/// Reads a square matrix from headerless CSV rows.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rows = Vec::new();
    for rec in reader(path, false)?.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|s| parse(path, s))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!(
            "{}: expected a non-empty square matrix",
            path.display()
        )));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
}

/// Reads the first two columns of a CSV file with a header row.
pub fn read_pairs_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in reader(path, true)?.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Config(format!(
                "{}: expected two columns",
                path.display()
            )));
        }
        xs.push(parse(path, &rec[0])?);
        ys.push(parse(path, &rec[1])?);
    }
    Ok((xs, ys))
}

/// Reads a single headerless column of numbers.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for rec in reader(path, false)?.records() {
        for s in rec?.iter() {
            out.push(parse(path, s)?);
        }
    }
    Ok(out)
}

pub fn write_g_samples(path: &Path, s: &GSamples) -> Result<()> {
    write_columns(
        path,
        &[("z", Column::Real(&s.z)), ("v", Column::Real(&s.v))],
    )
}
