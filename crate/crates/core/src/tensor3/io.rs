//! Tensor file formats.
//!
//! Binary container (`.t3`):
//!
//! ```text
//! offset  size        content
//! 0       8           magic  b"TRPCAT3" followed by format version byte 0x01
//! 8       8           n1  (u64, little endian)
//! 16      8           n2  (u64, little endian)
//! 24      8           n3  (u64, little endian)
//! 32      8*n1*n2*n3  f64 IEEE-754 little endian, slice-major
//!                     (index k*n1*n2 + j*n1 + i)
//! ```
//!
//! CSV: one frontal slice per block of `n1` rows with `n2` comma separated
//! values each; blocks are separated by one or more blank lines. Lines
//! starting with `#` are ignored.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::Tensor3;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 7] = *b"TRPCAT3";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 32;

pub fn write_binary<W: Write>(t: &Tensor3, mut w: W) -> Result<()> {
    let (n1, n2, n3) = t.dims();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    buf.extend_from_slice(&MAGIC);
    buf.push(FORMAT_VERSION);
    for n in [n1, n2, n3] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in t.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Tensor3> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn decode_binary(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("tensor file shorter than header".into()));
    }
    if bytes[..7] != MAGIC {
        return Err(Error::Format("bad magic, not a tensor file".into()));
    }
    if bytes[7] != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported tensor format version {}",
            bytes[7]
        )));
    }
    let dim = |o: usize| -> Result<usize> {
        let v = u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("dimension {v} too large")))
    };
    let (n1, n2, n3) = (dim(8)?, dim(16)?, dim(24)?);
    let count = n1
        .checked_mul(n2)
        .and_then(|x| x.checked_mul(n3))
        .ok_or_else(|| Error::Format("dimension product overflows".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes for {n1}x{n2}x{n3}, found {}",
            count * 8,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor3::from_vec(n1, n2, n3, data)
}

pub fn save(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    let f = fs::File::create(path)?;
    write_binary(t, std::io::BufWriter::new(f))
}

pub fn load(path: impl AsRef<Path>) -> Result<Tensor3> {
    decode_binary(&fs::read(path)?)
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| {
                Error::Format(format!("line {lineno}: cannot parse {:?}: {e}", s.trim()))
            })
        })
        .collect()
}

/// Parses blank-line separated blocks of CSV rows.
fn parse_blocks(text: &str) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut blocks = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        current.push(parse_row(line, n + 1)?);
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    Ok(blocks)
}

fn block_to_matrix(block: &[Vec<f64>], which: usize) -> Result<DMatrix<f64>> {
    let rows = block.len();
    let cols = block[0].len();
    if let Some(bad) = block.iter().position(|r| r.len() != cols) {
        return Err(Error::Format(format!(
            "block {}: row {} has {} values, expected {cols}",
            which + 1,
            bad + 1,
            block[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| block[i][j]))
}

/// Parses a tensor from CSV text.
pub fn parse_csv(text: &str) -> Result<Tensor3> {
    let blocks = parse_blocks(text)?;
    if blocks.is_empty() {
        return Err(Error::Format("CSV contains no data".into()));
    }
    let slices = blocks
        .iter()
        .enumerate()
        .map(|(k, b)| block_to_matrix(b, k))
        .collect::<Result<Vec<_>>>()?;
    Tensor3::from_slices(&slices)
}

/// Parses a single dense matrix from CSV text.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let blocks = parse_blocks(text)?;
    match blocks.as_slice() {
        [one] => {
            let m = block_to_matrix(one, 0)?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format("matrix has non-finite entries".into()));
            }
            Ok(m)
        }
        [] => Err(Error::Format("CSV contains no data".into())),
        _ => Err(Error::Format(format!(
            "expected a single matrix block, found {}",
            blocks.len()
        ))),
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Tensor3> {
    parse_csv(&fs::read_to_string(path)?)
}

/// Writes a tensor as CSV blocks with 17 significant digits.
pub fn to_csv(t: &Tensor3) -> String {
    let mut out = String::new();
    for (k, s) in t.slices().iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for i in 0..s.nrows() {
            let row: Vec<String> = (0..s.ncols()).map(|j| format!("{:.16e}", s[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

/// Loads a tensor, choosing the format by extension (`.csv` or binary).
pub fn load_any(path: impl AsRef<Path>) -> Result<Tensor3> {
    let p = path.as_ref();
    match p.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => load_csv(p),
        _ => load(p),
    }
}
