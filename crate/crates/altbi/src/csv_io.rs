//! Plain numeric matrix files: one matrix row per line, comma separated, no
//! header. Lines starting with `#` are skipped on read.

use std::path::Path;

use altbi_core::NonnegMatrix;

use crate::error::{HarnessError, Result};

pub fn read_matrix(path: &Path) -> Result<NonnegMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::csv(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarnessError::csv(path, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| HarnessError::MatrixFile {
                    path: path.into(),
                    msg: format!("record {}, field {}: {field:?} is not a number", line + 1, col + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::MatrixFile {
            path: path.into(),
            msg: "no data rows".into(),
        });
    }
    NonnegMatrix::from_rows(&rows).map_err(|e| HarnessError::MatrixFile {
        path: path.into(),
        msg: e.to_string(),
    })
}

/// Writes with the shortest representation that parses back to the same
/// `f64`, so `read_matrix(write_matrix(a)) == a` bit for bit.
pub fn write_matrix(path: &Path, a: &NonnegMatrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| HarnessError::csv(path, e))?;
    for i in 0..a.rows() {
        writer
            .write_record(a.row(i).iter().map(|v| v.to_string()))
            .map_err(|e| HarnessError::csv(path, e))?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}
