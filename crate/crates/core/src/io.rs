//! File formats: JSON vector families, bare JSON vectors, and a small
//! binary container for dumped operator matrices.
//!
//! A family file is a JSON object `{"dim": D, "count": N, "vectors": [...]}`
//! where `vectors` holds N arrays of D coordinates; vector i of the file
//! becomes column i of the in-memory matrix. The binary container starts
//! with a 16-byte header (magic `BPRT`, row count, column count, format
//! version, all little-endian u32 after the magic) followed by the entries
//! row-major as little-endian f64.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BPRT_MAGIC: &[u8; 4] = b"BPRT";
const BPRT_VERSION: u32 = 1;
const BPRT_HEADER_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct FamilyFile {
    dim: usize,
    count: usize,
    vectors: Vec<Vec<f64>>,
}

fn parse_error(path: &Path, text: &str, err: &serde_json::Error) -> Error {
    let line = err.line();
    let column = err.column();
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    Error::Parse {
        path: path.to_path_buf(),
        offset,
        line,
        column,
        message: err.to_string(),
    }
}

fn ensure_matrix_finite(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{}: non-finite value at row {i}, column {j}",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

/// Reads a family file into a dim-by-count matrix with vectors as columns.
pub fn read_family(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FamilyFile =
        serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e))?;
    if file.dim == 0 || file.count == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: dim and count must both be at least 1",
            path.display()
        )));
    }
    if file.vectors.len() != file.count {
        return Err(Error::InvalidInput(format!(
            "{}: {} vectors listed but count says {}",
            path.display(),
            file.vectors.len(),
            file.count
        )));
    }
    let mut m = DMatrix::<f64>::zeros(file.dim, file.count);
    for (i, v) in file.vectors.iter().enumerate() {
        if v.len() != file.dim {
            return Err(Error::InvalidInput(format!(
                "{}: vector {} has {} coordinates, expected {}",
                path.display(),
                i,
                v.len(),
                file.dim
            )));
        }
        for (row, &x) in v.iter().enumerate() {
            m[(row, i)] = x;
        }
    }
    ensure_matrix_finite(path, &m)?;
    Ok(m)
}

/// Writes a matrix as a family file, one column per listed vector.
pub fn write_family(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    ensure_matrix_finite(path, matrix)?;
    let file = FamilyFile {
        dim: matrix.nrows(),
        count: matrix.ncols(),
        vectors: (0..matrix.ncols())
            .map(|j| matrix.column(j).iter().copied().collect())
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("family serialization cannot fail");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a generator spec file.
pub fn read_spec(path: &Path) -> Result<crate::corpus::CorpusSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e))
}

/// Reads a bare JSON array of coordinates.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let values: Vec<f64> =
        serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e))?;
    if values.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: vector file is empty",
            path.display()
        )));
    }
    if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{}: non-finite coordinate at index {pos}",
            path.display()
        )));
    }
    Ok(DVector::from_vec(values))
}

/// Writes a matrix to the binary container.
pub fn write_bprt(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    ensure_matrix_finite(path, matrix)?;
    let rows = u32::try_from(matrix.nrows())
        .map_err(|_| Error::InvalidInput(format!("{} rows exceed the format", matrix.nrows())))?;
    let cols = u32::try_from(matrix.ncols())
        .map_err(|_| Error::InvalidInput(format!("{} cols exceed the format", matrix.ncols())))?;
    let mut bytes = Vec::with_capacity(BPRT_HEADER_LEN + matrix.len() * 8);
    bytes.extend_from_slice(BPRT_MAGIC);
    bytes.extend_from_slice(&rows.to_le_bytes());
    bytes.extend_from_slice(&cols.to_le_bytes());
    bytes.extend_from_slice(&BPRT_VERSION.to_le_bytes());
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            bytes.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn bprt_error(path: &Path, offset: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset,
        line: 0,
        column: 0,
        message,
    }
}

/// Reads a matrix back from the binary container.
pub fn read_bprt(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < BPRT_HEADER_LEN {
        return Err(bprt_error(
            path,
            bytes.len(),
            format!("file is {} bytes, shorter than the header", bytes.len()),
        ));
    }
    if &bytes[0..4] != BPRT_MAGIC {
        return Err(bprt_error(path, 0, "bad magic bytes".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let version = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if version != BPRT_VERSION {
        return Err(bprt_error(
            path,
            12,
            format!("unsupported format version {version}"),
        ));
    }
    let expected = BPRT_HEADER_LEN as u64 + rows as u64 * cols as u64 * 8;
    if bytes.len() as u64 != expected {
        return Err(bprt_error(
            path,
            bytes.len().min(expected as usize),
            format!(
                "payload is {} bytes, expected {} for {rows}x{cols}",
                bytes.len(),
                expected
            ),
        ));
    }
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    let mut cursor = BPRT_HEADER_LEN;
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = f64::from_le_bytes(bytes[cursor..cursor + 8].try_into().unwrap());
            cursor += 8;
        }
    }
    ensure_matrix_finite(path, &m)?;
    Ok(m)
}
