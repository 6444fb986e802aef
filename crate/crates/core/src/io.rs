//! Plain-text matrix format: one row per line, comma-separated decimal
//! floats, no header, LF line endings.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{MongeError, Result};
use crate::linalg::DenseMatrix;

pub fn read_matrix<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| MongeError::Parse {
                    line: k + 1,
                    msg: format!("{tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(MongeError::Parse {
                    line: k + 1,
                    msg: format!("ragged row: expected {} entries, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MongeError::Parse {
            line: 0,
            msg: "empty matrix".into(),
        });
    }
    DenseMatrix::from_rows(&rows)
}

pub fn write_matrix<W: Write>(m: &DenseMatrix, mut writer: W) -> Result<()> {
    for i in 0..m.n_rows() {
        let line = m
            .row(i)
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    read_matrix(text.as_bytes())
}

pub fn matrix_to_string(m: &DenseMatrix) -> String {
    let mut buf = Vec::new();
    write_matrix(m, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("formatted floats are ASCII")
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let file = fs::File::open(path)?;
    read_matrix(std::io::BufReader::new(file))
}

pub fn save_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix(m, &mut w)?;
    w.flush()?;
    Ok(())
}
