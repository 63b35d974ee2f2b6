//! Matrix Market reader and writer for dense complex matrices.
//!
//! Reads `coordinate` and `array` files with `real`, `integer` or `complex`
//! fields and the `general` symmetry. Writes `coordinate complex general`
//! with 17 significant digits, so a round trip is bitwise exact.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use neardefect::linalg::ComplexMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
}

fn parse_err(line: usize, message: impl Into<String>) -> MtxError {
    MtxError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market(path: &Path) -> Result<ComplexMatrix, MtxError> {
    let text = fs::read_to_string(path).map_err(|source| MtxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix_market(&text)
}

fn parse_header(line: &str) -> Result<(Layout, Field), MtxError> {
    let words: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(
            1,
            "expected `%%MatrixMarket matrix <layout> <field> <symmetry>`",
        ));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(MtxError::UnsupportedFormat(format!("layout `{other}`"))),
    };
    let field = match words[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(MtxError::UnsupportedFormat(format!("field `{other}`"))),
    };
    if words[4] != "general" {
        return Err(MtxError::UnsupportedFormat(format!(
            "symmetry `{}`",
            words[4]
        )));
    }
    Ok((layout, field))
}

fn parse_f64(token: &str, line: usize) -> Result<f64, MtxError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{token}`")));
    }
    Ok(v)
}

fn parse_usize(token: &str, line: usize) -> Result<usize, MtxError> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("`{token}` is not a non-negative integer")))
}

fn parse_value(tokens: &[&str], field: Field, line: usize) -> Result<Complex64, MtxError> {
    let want = match field {
        Field::Real => 1,
        Field::Complex => 2,
    };
    if tokens.len() != want {
        return Err(parse_err(
            line,
            format!("expected {want} value(s), found {}", tokens.len()),
        ));
    }
    let re = parse_f64(tokens[0], line)?;
    let im = if want == 2 {
        parse_f64(tokens[1], line)?
    } else {
        0.0
    };
    Ok(Complex64::new(re, im))
}

pub fn parse_matrix_market(text: &str) -> Result<ComplexMatrix, MtxError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let (layout, field) = parse_header(header)?;
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));

    let (size_line, size) = body
        .next()
        .ok_or_else(|| parse_err(1, "missing size line"))?;
    let size: Vec<&str> = size.split_whitespace().collect();
    let want = if layout == Layout::Coordinate { 3 } else { 2 };
    if size.len() != want {
        return Err(parse_err(
            size_line,
            format!("size line needs {want} integers"),
        ));
    }
    let rows = parse_usize(size[0], size_line)?;
    let cols = parse_usize(size[1], size_line)?;
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];

    match layout {
        Layout::Coordinate => {
            let nnz = parse_usize(size[2], size_line)?;
            let mut seen = vec![false; rows * cols];
            for k in 0..nnz {
                let (line, entry) = body.next().ok_or_else(|| {
                    parse_err(size_line, format!("expected {nnz} entries, found {k}"))
                })?;
                let tokens: Vec<&str> = entry.split_whitespace().collect();
                if tokens.len() < 2 {
                    return Err(parse_err(line, "entry needs row and column indices"));
                }
                let i = parse_usize(tokens[0], line)?;
                let j = parse_usize(tokens[1], line)?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(
                        line,
                        format!("index ({i}, {j}) outside {rows}x{cols}"),
                    ));
                }
                let idx = (i - 1) * cols + (j - 1);
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(parse_err(line, format!("duplicate entry ({i}, {j})")));
                }
                data[idx] = parse_value(&tokens[2..], field, line)?;
            }
        }
        Layout::Array => {
            // Column-major.
            for k in 0..rows * cols {
                let (line, entry) = body.next().ok_or_else(|| {
                    parse_err(
                        size_line,
                        format!("expected {} values, found {k}", rows * cols),
                    )
                })?;
                let tokens: Vec<&str> = entry.split_whitespace().collect();
                data[(k % rows) * cols + k / rows] = parse_value(&tokens, field, line)?;
            }
        }
    }
    if let Some((line, _)) = body.next() {
        return Err(parse_err(line, "unexpected trailing data"));
    }
    ComplexMatrix::from_row_major(rows, cols, data).map_err(|e| parse_err(size_line, e.to_string()))
}

/// Writes every entry except `+0 + 0i`; signed zeros survive the round trip.
pub fn write_matrix_market_to<W: Write>(mut w: W, a: &ComplexMatrix) -> io::Result<()> {
    let is_plus_zero = |z: &Complex64| z.re.to_bits() == 0 && z.im.to_bits() == 0;
    let nnz = a.as_slice().iter().filter(|z| !is_plus_zero(z)).count();
    writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), nnz)?;
    for i in 0..a.rows() {
        for (j, z) in a.row(i).iter().enumerate() {
            if !is_plus_zero(z) {
                writeln!(w, "{} {} {:.16e} {:.16e}", i + 1, j + 1, z.re, z.im)?;
            }
        }
    }
    Ok(())
}

pub fn write_matrix_market(path: &Path, a: &ComplexMatrix) -> Result<(), MtxError> {
    let io_err = |source| MtxError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = io::BufWriter::new(file);
    write_matrix_market_to(&mut w, a).map_err(io_err)?;
    w.flush().map_err(io_err)
}
