//! Matrix files: UTF-8 CSV whose first record is `rows,cols`, followed by
//! `rows` records of `cols` values each, written with 17 significant digits.

use std::fmt::Write as _;
use std::io::Read;

use super::DenseMatrix;
use crate::error::{Error, Result};

fn fmt_value(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign bit out of the file; -0 and 0 compare equal anyway.
        "0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{},{}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|&x| fmt_value(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// A vector is stored as a `len x 1` matrix.
pub fn write_vector_csv(v: &[f64]) -> String {
    write_matrix_csv(&DenseMatrix::from_fn(v.len(), 1, |i, _| v[i]))
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::invalid("empty matrix file"))??;
    if header.len() != 2 {
        return Err(Error::invalid("first record must be `rows,cols`"));
    }
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::invalid(format!("bad dimension `{s}`")))
    };
    let rows = parse_count(&header[0])?;
    let cols = parse_count(&header[1])?;
    let mut data = Vec::with_capacity(rows * cols);
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if i >= rows {
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            return Err(Error::invalid(format!("more than {rows} data records")));
        }
        if rec.len() != cols {
            return Err(Error::invalid(format!(
                "record {} has {} fields, expected {cols}",
                i + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::invalid(format!("bad number `{field}`")))?;
            data.push(x);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::invalid(format!(
            "expected {rows} data records, found {}",
            data.len() / cols.max(1)
        )));
    }
    DenseMatrix::new(rows, cols, data)
}

/// Reads either a column (`n x 1`) or a row (`1 x n`) matrix as a vector.
pub fn read_vector_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let m = read_matrix_csv(reader)?;
    match m.shape() {
        (_, 1) | (1, _) => Ok(m.data().to_vec()),
        (r, c) => Err(Error::invalid(format!("expected a vector, got {r}x{c} matrix"))),
    }
}
