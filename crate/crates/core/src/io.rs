//! Plain CSV matrices: comma-separated, row-major, with an optional header row.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{PsmError, Result};

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            // a first line that is not numeric is a header
            Err(_) if k == 0 => continue,
            Err(_) => return Err(PsmError::Parse(format!("non-numeric value on CSV line {}", k + 1))),
        }
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((k, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(PsmError::Parse(format!(
            "CSV row {} has {} values, expected {ncols}",
            k + 1,
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// A vector stored either as one column or as one row.
pub fn read_vector_csv<R: Read>(r: R) -> Result<DVector<f64>> {
    let m = read_matrix_csv(r)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (0, 0) => Ok(DVector::zeros(0)),
        (a, b) => Err(PsmError::Parse(format!("expected a vector, found a {a}x{b} matrix"))),
    }
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in m.row_iter() {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

/// One value per line.
pub fn write_vector_csv<W: Write>(v: &DVector<f64>, mut w: W) -> Result<()> {
    for x in v.iter() {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix_csv(std::fs::File::open(path)?)
}

pub fn read_vector_file(path: &Path) -> Result<DVector<f64>> {
    read_vector_csv(std::fs::File::open(path)?)
}
